#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pjfit/corpus.hpp"
#include "pjfit/explicit_model.hpp"
#include "pjfit/extraction.hpp"
#include "pjfit/implicit_model.hpp"
#include "pjfit/metrics.hpp"

namespace pjfit {

// entity-only: explicit towers without text; explicit-both: with text;
// fused-*: the same explicit towers plus the implicit towers.
enum class EvalMode { EntityOnly, ExplicitBoth, FusedEntity, FusedBoth };

std::string mode_name(EvalMode mode);
EvalMode parse_mode(const std::string& name);  // throws ConfigError
bool mode_uses_text(EvalMode mode);
bool mode_uses_implicit(EvalMode mode);

// sigmoid(f . g); throws ShapeError on a length mismatch.
double match_score(std::span<const double> f, std::span<const double> g);

// [explicit; implicit]
Tensor fuse(const Tensor& explicit_part, const Tensor& implicit_part);

// Models available to an evaluation; the mode decides which are required.
struct TrainedModels {
  std::optional<ExplicitModel> explicit_model;
  std::optional<ImplicitModel> implicit_model;
};

// Per-record scores for a range under `mode`.
std::vector<double> score_records(const Corpus& corpus, const EncodedCorpus& encoded,
                                  const TrainedModels& models, EvalMode mode, IndexRange range);

// Thresholds from validation, metrics on test. Throws DataError when a
// model needed by the mode is missing or was trained for another mode.
MetricsReport evaluate(const Corpus& corpus, const DatasetSplit& split, const EncodedCorpus& encoded,
                       const TrainedModels& models, EvalMode mode);

struct LrConfig {
  std::size_t epochs = 20;
  std::size_t batch = 64;
  double lr = 0.01;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
};

// Logistic regression on [x_resume; x_post].
MetricsReport lr_baseline(const Corpus& corpus, const DatasetSplit& split,
                          const EncodedCorpus& encoded, const LrConfig& config);

struct AblationRow {
  EvalMode mode;
  MetricsReport report;
};

std::string ablation_table(const std::vector<AblationRow>& rows,
                           const std::optional<MetricsReport>& baseline);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows,
                             const std::optional<MetricsReport>& baseline);

}  // namespace pjfit

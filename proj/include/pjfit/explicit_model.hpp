#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pjfit/corpus.hpp"
#include "pjfit/extraction.hpp"
#include "pjfit/features.hpp"
#include "pjfit/nn.hpp"
#include "pjfit/optim.hpp"

namespace pjfit {

struct TextCnnConfig {
  std::size_t vocab = 2;
  std::size_t sentences = 8;
  std::size_t words = 16;
  std::size_t embed = 16;
  std::size_t channels = 8;
  std::size_t kernel = 3;
  std::size_t pool = 2;
  std::size_t out = 32;

  friend bool operator==(const TextCnnConfig&, const TextCnnConfig&) = default;
};

struct ExplicitConfig {
  std::size_t fields = 1;      // s
  std::size_t sparse_dim = 1;  // d_x
  std::size_t d_fm = 7;
  std::size_t d_e = 32;
  std::vector<std::size_t> hidden{64, 64};
  bool use_text = true;
  TextCnnConfig text;

  void validate() const;
  friend bool operator==(const ExplicitConfig&, const ExplicitConfig&) = default;
};

nlohmann::json to_json(const ExplicitConfig& c);
ExplicitConfig explicit_config_from_json(const nlohmann::json& j);

// Squeeze: out[j] = w[idx_j] * val_j over the s active slots.
Tensor fm_first_order(const SparseFeature& x, const Tensor& w, std::size_t fields);
// (sum_i V_i x_i)^2 - sum_i (V_i x_i)^2, i.e. the i != j pair sum.
Tensor fm_second_order(const SparseFeature& x, const Tensor& v, std::size_t fields);
// Active-slot embeddings V[idx_j] * val_j, concatenated (s * d_fm).
Tensor fm_embeddings(const SparseFeature& x, const Tensor& v, std::size_t fields);

// Dense + relu stack.
struct DeepTrace {
  std::vector<Tensor> inputs;
  std::vector<Tensor> pre;
};
Tensor deep_component(const Tensor& embedded, const std::vector<nn::Dense>& blocks,
                      DeepTrace* trace);
Tensor deep_backward(std::vector<nn::Dense>& blocks, const DeepTrace& trace, const Tensor& dy);

// Word embedding, two (conv + relu + max-pool) blocks, flatten, dense.
// Sentences form the batch axis; block one spans the full embedding width
// with zero padding along words so the word axis keeps its length.
class TextCnn {
 public:
  struct Trace {
    std::vector<std::size_t> ids;
    Tensor embedded;  // [S, 1, W, E]
    Tensor conv1;     // pre-activation
    nn::MaxPoolResult pool1;
    Tensor conv2;
    nn::MaxPoolResult pool2;
    Tensor flat;
    bool filled = false;
  };

  TextCnn() = default;
  TextCnn(const std::string& name, const TextCnnConfig& config, Rng& rng);

  std::size_t flat_size() const;
  Tensor forward(const TextMatrix& text, Trace* trace) const;
  void backward(const Trace& trace, const Tensor& dy);
  void collect(nn::ParameterList& out);

  TextCnnConfig config;
  nn::Embedding words;
  nn::Conv2d conv1;
  nn::Conv2d conv2;
  nn::Dense head;
};

// One side of the explicit model: FM first and second order, deep blocks
// and (optionally) the text CNN, concatenated into a final dense to d_E.
class ExplicitTower {
 public:
  struct Trace {
    SparseFeature x;
    Tensor embedded;
    DeepTrace deep;
    TextCnn::Trace text;
    Tensor joint;
    bool filled = false;
  };

  ExplicitTower() = default;
  ExplicitTower(const std::string& name, const ExplicitConfig& config, Rng& rng);

  Tensor forward(const EncodedDocument& doc, Trace* trace = nullptr) const;
  // Throws ShapeError when the trace holds no forward pass.
  void backward(const Trace& trace, const Tensor& dy);
  nn::ParameterList parameters();

  std::string name;
  ExplicitConfig config;
  nn::Parameter fm_w;  // [d_x]
  nn::Parameter fm_v;  // [d_x, d_fm]
  std::vector<nn::Dense> blocks;
  TextCnn text;
  nn::Dense out;
};

// Resume tower and post tower; no shared parameters.
struct ExplicitModel {
  ExplicitModel() = default;
  ExplicitModel(const ExplicitConfig& resume, const ExplicitConfig& post, std::uint64_t seed);

  nn::ParameterList parameters();
  nlohmann::json config_json() const;

  ExplicitTower resume;
  ExplicitTower post;
};

inline Tensor explicit_embed(const EncodedDocument& doc, const ExplicitTower& tower) {
  return tower.forward(doc);
}

// Tower configs sized from fitted schemas.
ExplicitConfig explicit_config_for(const DocumentSchema& schema, const ExplicitConfig& base);

// Every resume (by record) and post encoded once.
struct EncodedCorpus {
  std::vector<EncodedDocument> resumes;
  std::map<PostId, EncodedDocument> posts;
};
EncodedCorpus encode_corpus(const Corpus& corpus, const FittedSchemas& schemas,
                            const TextCnnConfig& resume_text, const TextCnnConfig& post_text);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_auc = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch = 64;
  nn::AdamConfig adam;
  std::uint64_t seed = 1;
  std::function<void(const EpochLog&)> on_epoch;
};

TrainConfig explicit_train_defaults();  // lr 0.005, weight decay 1e-5

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_validation_auc = 0.0;
};

// Mean BCE of sigmoid(f_E(r) . g_E(p)); the parameters of the epoch with the
// best validation AUC are kept. Throws DataError on an empty train split and
// NumericalError (with epoch and batch) on a non-finite loss.
TrainResult train_explicit(const Corpus& corpus, const DatasetSplit& split,
                           const EncodedCorpus& encoded, ExplicitModel& model,
                           const TrainConfig& config);

// Logits f_E(r) . g_E(p) for records [begin, end).
std::vector<double> explicit_logits(const Corpus& corpus, const EncodedCorpus& encoded,
                                    const ExplicitModel& model, IndexRange range);

}  // namespace pjfit

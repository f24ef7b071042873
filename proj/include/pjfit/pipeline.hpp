#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pjfit/corpus.hpp"
#include "pjfit/explicit_model.hpp"
#include "pjfit/extraction.hpp"
#include "pjfit/fusion_eval.hpp"
#include "pjfit/implicit_model.hpp"

namespace pjfit {

enum class Scale { Desk, Paper };
Scale parse_scale(const std::string& name);  // "desk" or "paper"

// Sizes and training defaults for one scale.
struct Preset {
  std::string name;
  GeneratorConfig generator;
  double val_fraction = 0.0;
  double test_fraction = 0.0;
  ExplicitConfig explicit_base;  // s, d_x and vocab filled from the schema
  ImplicitConfig implicit;
  TrainConfig explicit_train;
  TrainConfig implicit_train;
  LrConfig lr;
  // Shape targets for synthetic schemas (paper scale only).
  std::size_t resume_fields = 0, post_fields = 0;
  std::size_t resume_dim = 0, post_dim = 0;
};

Preset preset(Scale scale);

// Corpus plus everything derived from it that training needs.
struct Prepared {
  Corpus corpus;
  DatasetSplit split;
  FittedSchemas schemas;
  EncodedCorpus encoded;
};

Prepared prepare(Corpus corpus, const Preset& preset);
Prepared prepare(Corpus corpus, const Preset& preset, const FittedSchemas& schemas);

ExplicitModel train_explicit_model(const Prepared& data, const Preset& preset, bool use_text,
                                   std::uint64_t seed, TrainResult* result = nullptr);
ImplicitModel train_implicit_model(const Prepared& data, const ExplicitModel& explicit_model,
                                   const Preset& preset, std::uint64_t seed,
                                   TrainResult* result = nullptr);

// The four ablation rows; trains two explicit and two implicit models.
std::vector<AblationRow> run_ablation(const Prepared& data, const Preset& preset,
                                      std::uint64_t seed);

// One forward pass per tower at the preset's shapes, on random documents.
struct ShapeReport {
  std::size_t resume_fields = 0, post_fields = 0;
  std::size_t resume_dim = 0, post_dim = 0;
  std::size_t resume_embedding = 0, post_embedding = 0;  // d_E
  std::size_t history_item = 0;                          // 2 d_E + 2
  std::size_t candidate_implicit = 0, post_implicit = 0; // d_I
  std::size_t d_fm = 0;
  bool all_finite = false;
};
ShapeReport shape_check(const Preset& preset, std::uint64_t seed);

}  // namespace pjfit

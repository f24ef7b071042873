#include "pjfit/fusion_eval.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pjfit/checkpoint.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/optim.hpp"
#include "pjfit/parallel.hpp"

namespace pjfit {

std::string mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::EntityOnly: return "entity-only";
    case EvalMode::ExplicitBoth: return "explicit-both";
    case EvalMode::FusedEntity: return "fused-entity";
    case EvalMode::FusedBoth: return "fused-both";
  }
  return "?";
}

EvalMode parse_mode(const std::string& name) {
  for (auto m : {EvalMode::EntityOnly, EvalMode::ExplicitBoth, EvalMode::FusedEntity,
                 EvalMode::FusedBoth})
    if (mode_name(m) == name) return m;
  throw ConfigError("unknown mode '" + name +
                    "' (expected entity-only, explicit-both, fused-entity or fused-both)");
}

bool mode_uses_text(EvalMode mode) {
  return mode == EvalMode::ExplicitBoth || mode == EvalMode::FusedBoth;
}

bool mode_uses_implicit(EvalMode mode) {
  return mode == EvalMode::FusedEntity || mode == EvalMode::FusedBoth;
}

double match_score(std::span<const double> f, std::span<const double> g) {
  require_size(g.size(), f.size(), "match_score");
  return nn::sigmoid(dot(f, g));
}

Tensor fuse(const Tensor& explicit_part, const Tensor& implicit_part) {
  return concat({&explicit_part, &implicit_part});
}

namespace {

void check_models(const TrainedModels& models, EvalMode mode) {
  const std::string name = mode_name(mode);
  if (!models.explicit_model) throw DataError("mode " + name + " needs an explicit checkpoint");
  const bool text = models.explicit_model->resume.config.use_text;
  if (text != mode_uses_text(mode))
    throw DataError("mode " + name + " needs explicit towers trained " +
                    (mode_uses_text(mode) ? "with" : "without") + " the text branch");
  if (mode_uses_implicit(mode)) {
    if (!models.implicit_model) throw DataError("mode " + name + " needs an implicit checkpoint");
    if (models.implicit_model->config.d_e != models.explicit_model->resume.config.d_e)
      throw DataError("implicit checkpoint does not match the explicit towers (d_E differs)");
  }
}

std::vector<int> labels_in(const Corpus& corpus, IndexRange range) {
  std::vector<int> out;
  for (std::size_t i = range.begin; i < range.end; ++i) out.push_back(corpus.records[i].label);
  return out;
}

}  // namespace

std::vector<double> score_records(const Corpus& corpus, const EncodedCorpus& encoded,
                                  const TrainedModels& models, EvalMode mode, IndexRange range) {
  check_models(models, mode);
  const ExplicitModel& em = *models.explicit_model;
  std::vector<double> out;
  if (!mode_uses_implicit(mode)) {
    out = explicit_logits(corpus, encoded, em, range);
    for (double& s : out) s = nn::sigmoid(s);
    return out;
  }
  const ImplicitModel& im = *models.implicit_model;
  const auto emb = embed_all(corpus, encoded, em);
  const HistoryIndex index(corpus);
  const PadChain post_chain = im.post.pad_chain();
  const PadChain cand_chain = im.candidate.pad_chain();
  out.resize(range.size());
  parallel_for(range.size(), [&](std::size_t k) {
    const std::size_t i = range.begin + k;
    const auto seq = history_sequences(corpus, index, emb, i, im.config);
    const Tensor f = fuse(emb.resumes[i], im.candidate.forward(seq.candidate, nullptr, &cand_chain));
    const Tensor g = fuse(emb.posts.at(corpus.records[i].post),
                          im.post.forward(seq.post, nullptr, &post_chain));
    out[k] = match_score(f.values(), g.values());
  });
  return out;
}

MetricsReport evaluate(const Corpus& corpus, const DatasetSplit& split, const EncodedCorpus& encoded,
                       const TrainedModels& models, EvalMode mode) {
  check_models(models, mode);
  const auto val = score_records(corpus, encoded, models, mode, split.validation);
  const auto test = score_records(corpus, encoded, models, mode, split.test);
  MetricsReport r =
      build_report(val, labels_in(corpus, split.validation), test, labels_in(corpus, split.test));
  r.mode = mode_name(mode);
  nlohmann::json cfg = {{"mode", r.mode}, {"explicit", models.explicit_model->config_json()}};
  if (mode_uses_implicit(mode)) cfg["implicit"] = models.implicit_model->config_json();
  r.config_hash = config_hash(cfg);
  return r;
}

MetricsReport lr_baseline(const Corpus& corpus, const DatasetSplit& split,
                          const EncodedCorpus& encoded, const LrConfig& config) {
  if (split.train.size() == 0) throw DataError("lr_baseline: empty train split");
  if (encoded.resumes.size() != corpus.records.size() || encoded.posts.empty())
    throw DataError("lr_baseline: corpus is not encoded");
  const std::size_t d_r = encoded.resumes.front().features.dim;
  const std::size_t d_p = encoded.posts.begin()->second.features.dim;
  nn::Parameter w("lr.weight", {d_r + d_p}), b("lr.bias", {1});
  nn::ParameterList params{&w, &b};
  nn::AdamConfig adam;
  adam.lr = config.lr;
  adam.weight_decay = config.weight_decay;

  auto logit = [&](std::size_t i) {
    const auto& xr = encoded.resumes[i].features;
    const auto& xp = encoded.posts.at(corpus.records[i].post).features;
    double z = b.value[0];
    for (std::size_t j = 0; j < xr.active(); ++j) z += w.value[xr.indices[j]] * xr.values[j];
    for (std::size_t j = 0; j < xp.active(); ++j) z += w.value[d_r + xp.indices[j]] * xp.values[j];
    return z;
  };
  auto scores = [&](IndexRange range) {
    std::vector<double> out;
    for (std::size_t i = range.begin; i < range.end; ++i) out.push_back(nn::sigmoid(logit(i)));
    return out;
  };
  const auto val_labels = labels_in(corpus, split.validation);

  Rng rng = Rng(config.seed).fork(0x11);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), split.train.begin);
  std::vector<Tensor> best;
  double best_auc = -1.0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const double dz = nn::bce_logit_grad(logit(i), corpus.records[i].label) * scale;
        const auto& xr = encoded.resumes[i].features;
        const auto& xp = encoded.posts.at(corpus.records[i].post).features;
        for (std::size_t j = 0; j < xr.active(); ++j) w.grad[xr.indices[j]] += dz * xr.values[j];
        for (std::size_t j = 0; j < xp.active(); ++j)
          w.grad[d_r + xp.indices[j]] += dz * xp.values[j];
        b.grad[0] += dz;
      }
      nn::adam_step(params, adam);
      nn::zero_grads(params);
    }
    const double auc = split.validation.size() > 0
                           ? compute_auc(scores(split.validation), val_labels).value_or(0.5)
                           : 0.5;
    if (auc > best_auc) {
      best_auc = auc;
      best = snapshot(params);
    }
  }
  restore(params, best);
  MetricsReport r = build_report(scores(split.validation), val_labels, scores(split.test),
                                 labels_in(corpus, split.test));
  r.mode = "lr-baseline";
  r.config_hash = config_hash({{"mode", r.mode},
                               {"epochs", config.epochs},
                               {"batch", config.batch},
                               {"lr", config.lr},
                               {"weight_decay", config.weight_decay},
                               {"seed", config.seed}});
  return r;
}

std::string ablation_table(const std::vector<AblationRow>& rows,
                           const std::optional<MetricsReport>& baseline) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %8s %8s %8s %10s\n", "mode", "auc", "acc", "f1",
                "prec@r0.8");
  os << line;
  auto row = [&](const std::string& name, const MetricsReport& r) {
    std::snprintf(line, sizeof line, "%-14s %8.4f %8.4f %8.4f %10.4f\n", name.c_str(), r.auc,
                  r.accuracy, r.f1, r.precision_at_recall);
    os << line;
  };
  if (baseline) row("lr-baseline", *baseline);
  for (const auto& r : rows) row(mode_name(r.mode), r.report);
  return os.str();
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows,
                             const std::optional<MetricsReport>& baseline) {
  nlohmann::json j = nlohmann::json::object();
  nlohmann::json list = nlohmann::json::array();
  for (const auto& r : rows) list.push_back(report_to_json(r.report));
  j["rows"] = list;
  if (baseline) j["baseline"] = report_to_json(*baseline);
  return j;
}

}  // namespace pjfit

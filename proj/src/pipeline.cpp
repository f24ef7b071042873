#include "pjfit/pipeline.hpp"

#include <algorithm>

#include "pjfit/errors.hpp"

namespace pjfit {

Scale parse_scale(const std::string& name) {
  if (name == "desk") return Scale::Desk;
  if (name == "paper") return Scale::Paper;
  throw ConfigError("unknown scale '" + name + "' (expected desk or paper)");
}

Preset preset(Scale scale) {
  Preset p;
  p.generator = GeneratorConfig{};
  p.val_fraction = 1.0 / 7.0;
  p.test_fraction = 1.0 / 7.0;
  p.explicit_base.d_fm = 7;
  p.explicit_base.hidden = {64, 64};
  p.explicit_base.text = {2, 8, 16, 16, 8, 3, 2, 32};
  p.explicit_train = explicit_train_defaults();
  p.implicit_train = implicit_train_defaults();
  p.implicit.hidden = 64;
  p.implicit.d_i = 64;
  p.implicit.max_post_history = 20;
  p.implicit.max_candidate_history = 5;
  if (scale == Scale::Desk) {
    p.name = "desk";
    p.explicit_base.d_e = 32;
    p.explicit_train.batch = 64;
    p.explicit_train.epochs = 20;
    p.explicit_train.adam.lr = 0.01;
    p.explicit_train.adam.weight_decay = 1e-3;
    p.implicit_train.batch = 64;
    p.implicit_train.epochs = 10;
  } else {
    p.name = "paper";
    p.explicit_base.d_e = 128;
    p.explicit_train.batch = 512;
    p.implicit_train.batch = 512;
    p.resume_fields = 264;
    p.post_fields = 57;
    p.resume_dim = 37000;
    p.post_dim = 1600;
  }
  p.implicit.d_e = p.explicit_base.d_e;
  p.lr.batch = p.explicit_train.batch;
  return p;
}

Prepared prepare(Corpus corpus, const Preset& preset) {
  const auto split = split_chronological(corpus, preset.val_fraction, preset.test_fraction);
  const auto schemas = fit_schema(corpus, split);
  return prepare(std::move(corpus), preset, schemas);
}

Prepared prepare(Corpus corpus, const Preset& preset, const FittedSchemas& schemas) {
  Prepared d;
  d.split = split_chronological(corpus, preset.val_fraction, preset.test_fraction);
  d.schemas = schemas;
  d.corpus = std::move(corpus);
  const auto& t = preset.explicit_base.text;
  d.encoded = encode_corpus(d.corpus, d.schemas, t, t);
  return d;
}

ExplicitModel train_explicit_model(const Prepared& data, const Preset& preset, bool use_text,
                                   std::uint64_t seed, TrainResult* result) {
  ExplicitConfig base = preset.explicit_base;
  base.use_text = use_text;
  ExplicitModel model(explicit_config_for(data.schemas.resume, base),
                      explicit_config_for(data.schemas.post, base), seed);
  TrainConfig tc = preset.explicit_train;
  tc.seed = seed;
  auto r = train_explicit(data.corpus, data.split, data.encoded, model, tc);
  if (result) *result = std::move(r);
  return model;
}

ImplicitModel train_implicit_model(const Prepared& data, const ExplicitModel& explicit_model,
                                   const Preset& preset, std::uint64_t seed, TrainResult* result) {
  ImplicitConfig c = preset.implicit;
  c.d_e = explicit_model.resume.config.d_e;
  ImplicitModel model(c, seed);
  TrainConfig tc = preset.implicit_train;
  tc.seed = seed;
  const auto emb = embed_all(data.corpus, data.encoded, explicit_model);
  auto r = train_implicit(data.corpus, data.split, emb, model, tc);
  if (result) *result = std::move(r);
  return model;
}

std::vector<AblationRow> run_ablation(const Prepared& data, const Preset& preset,
                                      std::uint64_t seed) {
  std::vector<AblationRow> rows;
  for (bool text : {false, true}) {
    TrainedModels models;
    models.explicit_model = train_explicit_model(data, preset, text, seed);
    models.implicit_model = train_implicit_model(data, *models.explicit_model, preset, seed);
    const EvalMode plain = text ? EvalMode::ExplicitBoth : EvalMode::EntityOnly;
    const EvalMode fused = text ? EvalMode::FusedBoth : EvalMode::FusedEntity;
    rows.push_back({plain, evaluate(data.corpus, data.split, data.encoded, models, plain)});
    rows.push_back({fused, evaluate(data.corpus, data.split, data.encoded, models, fused)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const AblationRow& a, const AblationRow& b) { return a.mode < b.mode; });
  return rows;
}

namespace {

EncodedDocument random_document(const EntitySchema& schema, const ExplicitConfig& c, Rng& rng) {
  EntityVector e;
  for (const auto& f : schema.fields())
    e.values.push_back({f.kind == FieldKind::Categorical ? rng.index(f.vocabulary.size()) : 0,
                        f.kind == FieldKind::Real ? f.mean + f.stddev * rng.normal() : 0.0});
  TextMatrix t{c.text.sentences, c.text.words, {}};
  for (std::size_t i = 0; i < t.sentences * t.words; ++i) t.ids.push_back(rng.index(c.text.vocab));
  return {encode_sparse(e, schema), t};
}

}  // namespace

ShapeReport shape_check(const Preset& preset, std::uint64_t seed) {
  if (preset.resume_fields == 0 || preset.post_fields == 0)
    throw ConfigError("shape check needs a preset with schema shape targets (use --scale paper)");
  Rng rng(seed);
  // A quarter of the vocabulary as a stand-in word list.
  const std::size_t vocab = 2000;
  const auto resume_schema =
      synthetic_schema("resume", preset.resume_fields, preset.resume_dim, preset.resume_fields / 11);
  const auto post_schema =
      synthetic_schema("post", preset.post_fields, preset.post_dim, preset.post_fields / 10);
  ExplicitConfig base = preset.explicit_base;
  base.text.vocab = vocab;
  ExplicitConfig rc = base, pc = base;
  rc.fields = resume_schema.size();
  rc.sparse_dim = resume_schema.sparse_dim();
  pc.fields = post_schema.size();
  pc.sparse_dim = post_schema.sparse_dim();
  const ExplicitModel em(rc, pc, seed);
  ImplicitConfig ic = preset.implicit;
  ic.d_e = base.d_e;
  const ImplicitModel im(ic, seed + 1);

  ShapeReport r;
  r.resume_fields = rc.fields;
  r.post_fields = pc.fields;
  r.resume_dim = rc.sparse_dim;
  r.post_dim = pc.sparse_dim;
  r.d_fm = rc.d_fm;
  const Tensor f = em.resume.forward(random_document(resume_schema, rc, rng));
  const Tensor g = em.post.forward(random_document(post_schema, pc, rng));
  r.resume_embedding = f.size();
  r.post_embedding = g.size();

  std::vector<HistoryEvent> events;
  for (std::size_t k = 0; k < 3; ++k)
    events.push_back({f.values(), g.values(), k % 2 ? Decision::Reject : Decision::Accept});
  const auto post_seq = encode_history(events, ic.max_post_history, ic.d_e);
  const auto cand_seq = encode_history(events, ic.max_candidate_history, ic.d_e);
  r.history_item = post_seq.front().size();
  const Tensor gi = im.post.forward(post_seq);
  const Tensor fi = im.candidate.forward(cand_seq);
  r.post_implicit = gi.size();
  r.candidate_implicit = fi.size();
  r.all_finite = f.all_finite() && g.all_finite() && gi.all_finite() && fi.all_finite();
  return r;
}

}  // namespace pjfit

// pjfit command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
// failure. Outputs are written atomically once the work succeeds.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pjfit/checkpoint.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/io.hpp"
#include "pjfit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pjfit;

namespace {

struct Options {
  std::string corpus, schema, checkpoint, explicit_checkpoint, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch, record;
  std::optional<double> lr, weight_decay;
  std::string mode;
  std::string scale = "desk";
  // generator overrides
  std::optional<double> drift, label_noise;
  std::optional<std::size_t> applications, candidates, posts;
  bool shuffle = false;
};

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw ConfigError(flag + " is required");
  if (!fs::exists(path)) throw ConfigError(flag + ": no such file " + path);
}

void require_out(const std::string& path) {
  if (path.empty()) throw ConfigError("--out is required");
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    throw ConfigError("--out: directory " + parent.string() + " does not exist");
}

std::uint64_t require_seed(const Options& o) {
  if (!o.seed) throw ConfigError("--seed is required");
  return *o.seed;
}

Preset make_preset(const Options& o) {
  Preset p = preset(parse_scale(o.scale));
  if (o.epochs) p.explicit_train.epochs = p.implicit_train.epochs = p.lr.epochs = *o.epochs;
  if (o.batch) {
    if (*o.batch == 0) throw ConfigError("--batch must be >= 1");
    p.explicit_train.batch = p.implicit_train.batch = p.lr.batch = *o.batch;
  }
  if (o.lr) p.explicit_train.adam.lr = p.implicit_train.adam.lr = p.lr.lr = *o.lr;
  if (o.weight_decay)
    p.explicit_train.adam.weight_decay = p.implicit_train.adam.weight_decay = p.lr.weight_decay =
        *o.weight_decay;
  return p;
}

void log_epochs(TrainConfig& tc, const std::string& what) {
  tc.on_epoch = [what](const EpochLog& l) {
    std::fprintf(stderr, "%s epoch %zu  loss %.5f  val auc %.4f\n", what.c_str(), l.epoch,
                 l.train_loss, l.validation_auc);
  };
}

std::string schema_hash(const FittedSchemas& s) { return config_hash(schemas_to_json(s)); }

struct Loaded {
  Preset preset;
  Prepared data;
};

Loaded load_inputs(const Options& o) {
  require_file("--corpus", o.corpus);
  require_file("--schema", o.schema);
  Loaded l{make_preset(o), {}};
  auto schemas = load_schemas(o.schema);
  l.data = prepare(load_corpus(o.corpus), l.preset, schemas);
  return l;
}

ExplicitModel explicit_from(const Checkpoint& ck) {
  if (!ck.config.contains("explicit")) throw DataError("checkpoint has no explicit towers");
  const auto& e = ck.config.at("explicit");
  ExplicitModel m(explicit_config_from_json(e.at("resume")), explicit_config_from_json(e.at("post")),
                  0);
  restore_parameters(ck, m.parameters());
  return m;
}

TrainedModels models_from(const Checkpoint& ck, const FittedSchemas& schemas) {
  if (ck.config.value("schema_hash", std::string()) != schema_hash(schemas))
    throw DataError("checkpoint was trained against a different schema");
  TrainedModels m;
  m.explicit_model = explicit_from(ck);
  if (ck.config.contains("implicit")) {
    m.implicit_model.emplace(implicit_config_from_json(ck.config.at("implicit")), 0);
    restore_parameters(ck, m.implicit_model->parameters());
  }
  return m;
}

EvalMode default_mode(const TrainedModels& m) {
  const bool text = m.explicit_model->resume.config.use_text;
  if (m.implicit_model) return text ? EvalMode::FusedBoth : EvalMode::FusedEntity;
  return text ? EvalMode::ExplicitBoth : EvalMode::EntityOnly;
}

// ------------------------------------------------------------- subcommands

int cmd_generate(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  require_out(o.out);
  GeneratorConfig g = make_preset(o).generator;
  if (o.drift) g.drift = *o.drift;
  if (o.label_noise) g.label_noise = *o.label_noise;
  if (o.applications) g.applications = *o.applications;
  if (o.candidates) g.candidates = *o.candidates;
  if (o.posts) g.posts = *o.posts;
  Corpus c = generate_synthetic(g, seed);
  if (o.shuffle) c = shuffle_labels(c, seed);
  save_corpus(c, o.out);
  std::printf("wrote %zu applications, %zu posts to %s\n", c.records.size(), c.posts.size(),
              o.out.c_str());
  return 0;
}

int cmd_extract(const Options& o) {
  require_file("--corpus", o.corpus);
  require_out(o.out);
  const Preset p = make_preset(o);
  const Corpus c = load_corpus(o.corpus);
  const auto split = split_chronological(c, p.val_fraction, p.test_fraction);
  const auto schemas = fit_schema(c, split);
  save_schemas(schemas, o.out);
  std::printf("resume: s=%zu d_x=%zu words=%zu\npost:   s=%zu d_x=%zu words=%zu\n",
              schemas.resume.entities.size(), schemas.resume.entities.sparse_dim(),
              schemas.resume.words.size(), schemas.post.entities.size(),
              schemas.post.entities.sparse_dim(), schemas.post.words.size());
  return 0;
}

int cmd_train_explicit(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  require_out(o.out);
  bool text = true;
  if (!o.mode.empty()) {
    const EvalMode m = parse_mode(o.mode);
    if (mode_uses_implicit(m)) throw ConfigError("train-explicit takes entity-only or explicit-both");
    text = mode_uses_text(m);
  }
  auto in = load_inputs(o);
  log_epochs(in.preset.explicit_train, "explicit");
  TrainResult r;
  ExplicitModel m = train_explicit_model(in.data, in.preset, text, seed, &r);
  const nlohmann::json cfg = {{"scale", in.preset.name},
                              {"schema_hash", schema_hash(in.data.schemas)},
                              {"explicit", m.config_json()}};
  save_checkpoint(make_checkpoint(cfg, m.parameters()), o.out);
  std::printf("best epoch %zu, validation auc %.4f\n", r.best_epoch, r.best_validation_auc);
  return 0;
}

int cmd_train_implicit(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  require_out(o.out);
  const std::string& ck_path = o.explicit_checkpoint.empty() ? o.checkpoint : o.explicit_checkpoint;
  require_file("--explicit-checkpoint", ck_path);
  auto in = load_inputs(o);
  const Checkpoint ck = load_checkpoint(ck_path);
  const TrainedModels frozen = models_from(ck, in.data.schemas);
  log_epochs(in.preset.implicit_train, "implicit");
  TrainResult r;
  ImplicitModel im = train_implicit_model(in.data, *frozen.explicit_model, in.preset, seed, &r);
  nlohmann::json cfg = ck.config;
  cfg["implicit"] = im.config_json();
  ExplicitModel em = *frozen.explicit_model;
  auto params = em.parameters();
  for (auto* p : im.parameters()) params.push_back(p);
  save_checkpoint(make_checkpoint(cfg, params), o.out);
  std::printf("best epoch %zu, validation auc %.4f\n", r.best_epoch, r.best_validation_auc);
  return 0;
}

int cmd_eval(const Options& o) {
  require_file("--checkpoint", o.checkpoint);
  if (!o.out.empty()) require_out(o.out);
  std::optional<EvalMode> mode;
  if (!o.mode.empty()) mode = parse_mode(o.mode);
  auto in = load_inputs(o);
  const TrainedModels models = models_from(load_checkpoint(o.checkpoint), in.data.schemas);
  const auto report = evaluate(in.data.corpus, in.data.split, in.data.encoded, models,
                               mode.value_or(default_mode(models)));
  const std::string text = report_to_json(report).dump(2) + "\n";
  if (!o.out.empty()) write_file_atomic(o.out, text);
  std::cout << text;
  return 0;
}

int cmd_score(const Options& o) {
  require_file("--checkpoint", o.checkpoint);
  if (!o.out.empty()) require_out(o.out);
  std::optional<EvalMode> mode;
  if (!o.mode.empty()) mode = parse_mode(o.mode);
  auto in = load_inputs(o);
  const TrainedModels models = models_from(load_checkpoint(o.checkpoint), in.data.schemas);
  IndexRange range = in.data.split.test;
  if (o.record) {
    if (*o.record >= in.data.corpus.records.size())
      throw ConfigError("--record out of range (corpus has " +
                        std::to_string(in.data.corpus.records.size()) + " records)");
    range = {*o.record, *o.record + 1};
  }
  const auto scores = score_records(in.data.corpus, in.data.encoded, models,
                                    mode.value_or(default_mode(models)), range);
  std::string text;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const auto& r = in.data.corpus.records[range.begin + k];
    text += nlohmann::json{{"record", range.begin + k},
                           {"candidate", r.candidate.value},
                           {"post", r.post.value},
                           {"score", scores[k]},
                           {"label", r.label}}
                .dump() +
            "\n";
  }
  if (!o.out.empty()) write_file_atomic(o.out, text);
  std::cout << text;
  return 0;
}

int cmd_explain(const Options& o) {
  require_file("--checkpoint", o.checkpoint);
  if (!o.record) throw ConfigError("--record is required");
  std::optional<EvalMode> mode;
  if (!o.mode.empty()) mode = parse_mode(o.mode);
  auto in = load_inputs(o);
  const auto& corpus = in.data.corpus;
  if (*o.record >= corpus.records.size())
    throw ConfigError("--record out of range (corpus has " + std::to_string(corpus.records.size()) +
                      " records)");
  const TrainedModels models = models_from(load_checkpoint(o.checkpoint), in.data.schemas);
  const EvalMode m = mode.value_or(default_mode(models));
  const std::size_t i = *o.record;
  const double score =
      score_records(corpus, in.data.encoded, models, m, {i, i + 1}).front();
  const auto& rec = corpus.records[i];
  std::printf("record %zu  candidate %llu  post %llu  label %d\n", i,
              static_cast<unsigned long long>(rec.candidate.value),
              static_cast<unsigned long long>(rec.post.value), rec.label);
  std::printf("mode %s  score %.4f\n\n", mode_name(m).c_str(), score);
  const auto post = describe_entities(
      extract_entities(corpus.post(rec.post), in.data.schemas.post.entities),
      in.data.schemas.post.entities);
  const auto resume = describe_entities(
      extract_entities(rec.resume, in.data.schemas.resume.entities), in.data.schemas.resume.entities);
  std::printf("%-40s | %s\n", "job post", "resume");
  std::printf("%s\n", std::string(84, '-').c_str());
  for (std::size_t k = 0; k < std::max(post.size(), resume.size()); ++k) {
    std::string l = k < post.size() ? post[k].first + " = " + post[k].second : "";
    std::string r = k < resume.size() ? resume[k].first + " = " + resume[k].second : "";
    std::printf("%-40s | %s\n", l.c_str(), r.c_str());
  }
  return 0;
}

int cmd_baseline(const Options& o) {
  if (!o.out.empty()) require_out(o.out);
  auto in = load_inputs(o);
  LrConfig lc = in.preset.lr;
  if (o.seed) lc.seed = *o.seed;
  const auto report = lr_baseline(in.data.corpus, in.data.split, in.data.encoded, lc);
  const std::string text = report_to_json(report).dump(2) + "\n";
  if (!o.out.empty()) write_file_atomic(o.out, text);
  std::cout << text;
  return 0;
}

int cmd_ablation(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  if (!o.out.empty()) require_out(o.out);
  auto in = load_inputs(o);
  log_epochs(in.preset.explicit_train, "explicit");
  log_epochs(in.preset.implicit_train, "implicit");
  const auto rows = run_ablation(in.data, in.preset, seed);
  LrConfig lc = in.preset.lr;
  lc.seed = seed;
  const auto baseline = lr_baseline(in.data.corpus, in.data.split, in.data.encoded, lc);
  if (!o.out.empty()) write_file_atomic(o.out, ablation_json(rows, baseline).dump(2) + "\n");
  std::cout << ablation_table(rows, baseline);
  return 0;
}

int cmd_shape_check(const Options& o) {
  const Preset p = make_preset(o);
  const auto r = shape_check(p, o.seed.value_or(1));
  std::printf("resume: s=%zu d_x=%zu -> f_E length %zu\n", r.resume_fields, r.resume_dim,
              r.resume_embedding);
  std::printf("post:   s=%zu d_x=%zu -> g_E length %zu\n", r.post_fields, r.post_dim,
              r.post_embedding);
  std::printf("d_fm=%zu  history item length %zu\n", r.d_fm, r.history_item);
  std::printf("f_I length %zu, g_I length %zu, finite %s\n", r.candidate_implicit, r.post_implicit,
              r.all_finite ? "yes" : "no");
  const std::size_t d_e = p.explicit_base.d_e;
  const bool ok = r.resume_embedding == d_e && r.post_embedding == d_e &&
                  r.history_item == 2 * d_e + 2 && r.candidate_implicit == p.implicit.d_i &&
                  r.post_implicit == p.implicit.d_i && r.all_finite;
  std::printf("%s\n", ok ? "shapes ok" : "shape mismatch");
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"person-job fit: explicit and implicit feature fusion"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--scale", o.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    c->add_option("--seed", o.seed, "random seed");
  };
  auto inputs = [&](CLI::App* c) {
    c->add_option("--corpus", o.corpus, "corpus records file (JSONL)");
    c->add_option("--schema", o.schema, "fitted schema file");
  };
  auto training = [&](CLI::App* c) {
    c->add_option("--epochs", o.epochs);
    c->add_option("--lr", o.lr);
    c->add_option("--weight-decay", o.weight_decay);
    c->add_option("--batch", o.batch);
  };

  auto* gen = app.add_subcommand("generate", "generate a synthetic corpus");
  common(gen);
  gen->add_option("--out", o.out, "records file; posts and manifest go next to it");
  gen->add_option("--drift", o.drift, "post bar drift strength");
  gen->add_option("--label-noise", o.label_noise);
  gen->add_option("--applications", o.applications);
  gen->add_option("--candidates", o.candidates);
  gen->add_option("--posts", o.posts);
  gen->add_flag("--shuffle-labels", o.shuffle, "permute labels (no-signal control)");

  auto* ext = app.add_subcommand("extract", "fit entity schemas on the train split");
  common(ext);
  ext->add_option("--corpus", o.corpus);
  ext->add_option("--out", o.out);

  auto* tex = app.add_subcommand("train-explicit", "train the explicit towers");
  common(tex);
  inputs(tex);
  training(tex);
  tex->add_option("--mode", o.mode, "entity-only or explicit-both");
  tex->add_option("--out", o.out, "checkpoint to write");

  auto* tim = app.add_subcommand("train-implicit", "train the implicit towers");
  common(tim);
  inputs(tim);
  training(tim);
  tim->add_option("--explicit-checkpoint,--checkpoint", o.explicit_checkpoint);
  tim->add_option("--out", o.out, "checkpoint to write");

  auto* ev = app.add_subcommand("eval", "evaluate on the test split");
  common(ev);
  inputs(ev);
  ev->add_option("--checkpoint", o.checkpoint);
  ev->add_option("--mode", o.mode);
  ev->add_option("--out", o.out, "report JSON");

  auto* sc = app.add_subcommand("score", "score test records (or one record)");
  common(sc);
  inputs(sc);
  sc->add_option("--checkpoint", o.checkpoint);
  sc->add_option("--mode", o.mode);
  sc->add_option("--record", o.record);
  sc->add_option("--out", o.out);

  auto* ex = app.add_subcommand("explain", "score and entities of one application");
  common(ex);
  inputs(ex);
  ex->add_option("--checkpoint", o.checkpoint);
  ex->add_option("--mode", o.mode);
  ex->add_option("--record", o.record);

  auto* bl = app.add_subcommand("baseline", "logistic regression on the sparse vectors");
  common(bl);
  inputs(bl);
  training(bl);
  bl->add_option("--out", o.out);

  auto* ab = app.add_subcommand("ablation", "train and evaluate the four ablation modes");
  common(ab);
  inputs(ab);
  training(ab);
  ab->add_option("--out", o.out, "ablation JSON");

  auto* sh = app.add_subcommand("shape-check", "one forward pass per tower at preset shapes");
  common(sh);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (ext->parsed()) return cmd_extract(o);
    if (tex->parsed()) return cmd_train_explicit(o);
    if (tim->parsed()) return cmd_train_implicit(o);
    if (ev->parsed()) return cmd_eval(o);
    if (sc->parsed()) return cmd_score(o);
    if (ex->parsed()) return cmd_explain(o);
    if (bl->parsed()) return cmd_baseline(o);
    if (ab->parsed()) return cmd_ablation(o);
    if (sh->parsed()) return cmd_shape_check(o);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

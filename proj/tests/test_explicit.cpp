#include <cmath>

#include "doctest.h"
#include "pjfit/checkpoint.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/explicit_model.hpp"
#include "pjfit/grad_check.hpp"
#include "pjfit/metrics.hpp"
#include "test_helpers.hpp"

using namespace pjfit;

namespace {

SparseFeature random_sparse(Rng& rng, std::size_t s, std::size_t d_x) {
  // s distinct sorted slots.
  std::vector<std::size_t> all(d_x);
  for (std::size_t i = 0; i < d_x; ++i) all[i] = i;
  rng.shuffle(all);
  all.resize(s);
  std::sort(all.begin(), all.end());
  SparseFeature x{d_x, all, {}};
  for (std::size_t j = 0; j < s; ++j) x.values.push_back(rng.uniform(-2.0, 2.0));
  return x;
}

Tensor brute_second_order(const SparseFeature& x, const Tensor& v) {
  Tensor out({v.dim(1)});
  for (std::size_t i = 0; i < x.active(); ++i)
    for (std::size_t j = 0; j < x.active(); ++j) {
      if (i == j) continue;
      for (std::size_t k = 0; k < v.dim(1); ++k)
        out[k] += v.at(x.indices[i], k) * v.at(x.indices[j], k) * x.values[i] * x.values[j];
    }
  return out;
}

TextMatrix random_text(Rng& rng, const TextCnnConfig& c) {
  TextMatrix t{c.sentences, c.words, {}};
  for (std::size_t i = 0; i < c.sentences * c.words; ++i) t.ids.push_back(rng.index(c.vocab));
  return t;
}

ExplicitConfig toy_config(bool use_text) {
  ExplicitConfig c;
  c.fields = 3;
  c.sparse_dim = 7;
  c.d_fm = 2;
  c.d_e = 4;
  c.hidden = {5, 4};
  c.use_text = use_text;
  c.text = {5, 2, 3, 3, 2, 3, 2, 2};
  return c;
}

EncodedDocument random_doc(Rng& rng, const ExplicitConfig& c) {
  return {random_sparse(rng, c.fields, c.sparse_dim), random_text(rng, c.text)};
}

GeneratorConfig small_corpus_config(std::size_t applications) {
  GeneratorConfig g;
  g.candidates = applications / 3;
  g.posts = 60;
  g.applications = applications;
  g.drift = 0.0;
  g.label_noise = 0.0;
  return g;
}

ExplicitConfig small_base() {
  ExplicitConfig c;
  c.d_e = 8;
  c.d_fm = 4;
  c.hidden = {16};
  c.text = {2, 4, 8, 8, 4, 3, 2, 8};
  return c;
}

}  // namespace

TEST_CASE("fm_first_order squeezes the active slots") {
  const SparseFeature x{4, {0, 3}, {1.0, 2.0}};
  const Tensor w = Tensor::vector({0.5, 9.0, 9.0, 0.25});
  CHECK(fm_first_order(x, w, 2) == Tensor::vector({0.5, 0.5}));
  CHECK(fm_first_order(x, Tensor({4}), 2) == Tensor({2}));
  const SparseFeature zero_real{4, {1, 3}, {1.0, 0.0}};
  CHECK(fm_first_order(zero_real, w, 2).size() == 2);
  CHECK_THROWS_AS(fm_first_order(x, w, 3), ShapeError);
}

TEST_CASE("fm_second_order small cases") {
  Tensor v({2, 2}, {1, 0, 0, 1});
  CHECK(fm_second_order(SparseFeature{2, {1}, {3.0}}, v, 1) == Tensor({2}));
  CHECK(fm_second_order(SparseFeature{2, {0, 1}, {1.0, 1.0}}, v, 2) == Tensor({2}));
  Tensor same({2, 2}, {1, 2, 3, 4});
  // 2 * V_a * V_b
  CHECK(fm_second_order(SparseFeature{2, {0, 1}, {1.0, 1.0}}, same, 2) == Tensor::vector({6, 16}));
}

TEST_CASE("fm_second_order equals the i != j double loop") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d_x = 12 + rng.index(20);
    const std::size_t s = 1 + rng.index(10);
    const std::size_t d_fm = 1 + rng.index(8);
    Tensor v({d_x, d_fm});
    for (double& e : v.values()) e = rng.uniform(-1.0, 1.0);
    const auto x = random_sparse(rng, s, d_x);
    const Tensor fast = fm_second_order(x, v, s);
    const Tensor slow = brute_second_order(x, v);
    for (std::size_t k = 0; k < d_fm; ++k) REQUIRE(std::abs(fast[k] - slow[k]) < 1e-10);
  }
}

TEST_CASE("deep component shapes and degenerate weights") {
  Rng rng(2);
  nn::Dense id("id", 3, 3, rng);
  id.weight.value = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  id.bias.value.fill(0.0);
  const Tensor e = Tensor::vector({0.5, 2.0, 0.0});
  CHECK(deep_component(e, {id}, nullptr) == e);

  nn::Dense b("b", 3, 2, rng);
  b.weight.value.fill(0.3);
  b.bias.value = Tensor::vector({0.7, 0.2});
  CHECK(deep_component(Tensor({3}), {b}, nullptr) == Tensor::vector({0.7, 0.2}));

  ExplicitConfig c;
  c.fields = 12;
  c.sparse_dim = 100;
  c.d_fm = 7;
  c.use_text = false;
  ExplicitTower tower("t", c, rng);
  CHECK(tower.blocks[0].in_features() == 84);
}

TEST_CASE("text cnn is a function of its input only") {
  Rng rng(4);
  TextCnnConfig c{20, 4, 6, 5, 3, 3, 2, 7};
  TextCnn cnn("cnn", c, rng);
  TextMatrix pad{4, 6, std::vector<std::size_t>(24, 0)};
  const Tensor a = cnn.forward(pad, nullptr);
  CHECK(a.size() == 7);
  CHECK(cnn.forward(pad, nullptr) == a);

  TextMatrix t = random_text(rng, c);
  TextMatrix swapped = t;
  for (std::size_t w = 0; w < c.words; ++w) std::swap(swapped.ids[w], swapped.ids[c.words + w]);
  const Tensor y1 = cnn.forward(t, nullptr), y2 = cnn.forward(swapped, nullptr);
  CHECK(y1.shape() == y2.shape());
  CHECK(y1 != y2);

  t.ids[3] = 20;
  CHECK_THROWS_AS(cnn.forward(t, nullptr), ShapeError);
  CHECK_THROWS_AS(cnn.forward(TextMatrix{3, 6, std::vector<std::size_t>(18, 0)}, nullptr), ShapeError);
}

TEST_CASE("text cnn gradient check on a 4x6 toy") {
  Rng rng(5);
  TextCnnConfig c{9, 4, 6, 3, 2, 3, 2, 3};
  TextCnn cnn("cnn", c, rng);
  const TextMatrix t = random_text(rng, c);
  const Tensor r = testing::random_like(Tensor({3}), rng);
  nn::ParameterList params;
  cnn.collect(params);
  TextCnn::Trace trace;
  const auto report = nn::grad_check(
      params, [&] { return testing::project(cnn.forward(t, nullptr), r); },
      [&] {
        cnn.forward(t, &trace);
        cnn.backward(trace, r);
      },
      1e-4);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("explicit tower output length and determinism") {
  Rng rng(6);
  for (bool use_text : {true, false}) {
    const auto c = toy_config(use_text);
    ExplicitTower tower("t", c, rng);
    for (int i = 0; i < 20; ++i) {
      const auto doc = random_doc(rng, c);
      const Tensor y = explicit_embed(doc, tower);
      CHECK(y.size() == c.d_e);
      CHECK(y.all_finite());
      CHECK(explicit_embed(doc, tower) == y);
    }
  }
}

TEST_CASE("entity-only towers carry no text parameters") {
  Rng rng(7);
  ExplicitTower with("a", toy_config(true), rng);
  ExplicitTower without("b", toy_config(false), rng);
  auto has_text = [](ExplicitTower& t) {
    for (auto* p : t.parameters())
      if (p->name.find(".text.") != std::string::npos) return true;
    return false;
  };
  CHECK(has_text(with));
  CHECK_FALSE(has_text(without));
  // Text changes the output only when the branch is on.
  const auto c = toy_config(false);
  auto doc = random_doc(rng, c);
  const Tensor y = without.forward(doc);
  doc.text.ids.assign(doc.text.ids.size(), 1);
  CHECK(without.forward(doc) == y);
}

TEST_CASE("full explicit toy model passes the gradient check") {
  for (bool use_text : {true, false}) {
    ExplicitModel model(toy_config(use_text), toy_config(use_text), 8);
    Rng rng(9);
    std::vector<EncodedDocument> resumes, posts;
    std::vector<int> labels;
    for (int i = 0; i < 3; ++i) {
      resumes.push_back(random_doc(rng, model.resume.config));
      posts.push_back(random_doc(rng, model.post.config));
      labels.push_back(i % 2);
    }
    auto params = model.parameters();
    auto loss = [&] {
      double l = 0;
      for (std::size_t i = 0; i < resumes.size(); ++i) {
        const double z = dot(model.resume.forward(resumes[i]).values(),
                             model.post.forward(posts[i]).values());
        l += nn::bce_loss(nn::sigmoid(z), labels[i]);
      }
      return l;
    };
    ExplicitTower::Trace tr, tp;
    auto fb = [&] {
      for (std::size_t i = 0; i < resumes.size(); ++i) {
        Tensor f = model.resume.forward(resumes[i], &tr);
        Tensor g = model.post.forward(posts[i], &tp);
        const double dz = nn::bce_logit_grad(dot(f.values(), g.values()), labels[i]);
        Tensor df = g, dg = f;
        for (double& v : df.values()) v *= dz;
        for (double& v : dg.values()) v *= dz;
        model.resume.backward(tr, df);
        model.post.backward(tp, dg);
      }
    };
    const auto report = nn::grad_check(params, loss, fb, 1e-4);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("backward without forward fails hard") {
  Rng rng(1);
  ExplicitTower tower("t", toy_config(true), rng);
  ExplicitTower::Trace empty;
  CHECK_THROWS_AS(tower.backward(empty, Tensor({4})), ShapeError);
}

TEST_CASE("config validation and json round trip") {
  auto c = toy_config(true);
  CHECK(explicit_config_from_json(to_json(c)) == c);
  c.d_fm = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("explicit training learns, is reproducible and keeps the best epoch") {
  const Corpus corpus = generate_synthetic(small_corpus_config(1500), 21);
  const auto split = split_chronological(corpus, 0.2, 0.2);
  const auto schemas = fit_schema(corpus, split);
  const auto rc = explicit_config_for(schemas.resume, small_base());
  const auto pc = explicit_config_for(schemas.post, small_base());
  const auto encoded = encode_corpus(corpus, schemas, rc.text, pc.text);

  TrainConfig tc = explicit_train_defaults();
  tc.epochs = 4;
  tc.batch = 32;
  tc.seed = 3;
  ExplicitModel m1(rc, pc, 3), m2(rc, pc, 3);
  const auto r1 = train_explicit(corpus, split, encoded, m1, tc);
  const auto r2 = train_explicit(corpus, split, encoded, m2, tc);
  REQUIRE(r1.log.size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(r1.log[e].train_loss == r2.log[e].train_loss);
    CHECK(r1.log[e].validation_auc == r2.log[e].validation_auc);
  }
  CHECK(r1.log.back().train_loss < r1.log.front().train_loss);
  CHECK(r1.best_validation_auc > 0.75);

  // The retained parameters reproduce the best epoch's validation AUC.
  std::vector<int> labels;
  for (std::size_t i = split.validation.begin; i < split.validation.end; ++i)
    labels.push_back(corpus.records[i].label);
  const auto scores = explicit_logits(corpus, encoded, m1, split.validation);
  CHECK(*compute_auc(scores, labels) == r1.best_validation_auc);

  // Checkpoint round trip restores identical scores.
  const auto path = std::filesystem::temp_directory_path() / "pjfit_explicit_ck.json";
  save_checkpoint(make_checkpoint(m1.config_json(), m1.parameters()), path);
  const auto ck = load_checkpoint(path);
  ExplicitModel m3(explicit_config_from_json(ck.config.at("resume")),
                   explicit_config_from_json(ck.config.at("post")), 99);
  restore_parameters(ck, m3.parameters());
  CHECK(explicit_logits(corpus, encoded, m3, split.validation) == scores);
  CHECK(ck.has_section("explicit.resume."));
  CHECK(ck.has_section("explicit.post."));
  CHECK_FALSE(ck.has_section("implicit."));
}

TEST_CASE("training rejects an empty train split") {
  const Corpus corpus = generate_synthetic(small_corpus_config(300), 2);
  const auto split = split_chronological(corpus, 0.2, 0.2);
  const auto schemas = fit_schema(corpus, split);
  const auto rc = explicit_config_for(schemas.resume, small_base());
  const auto pc = explicit_config_for(schemas.post, small_base());
  const auto encoded = encode_corpus(corpus, schemas, rc.text, pc.text);
  ExplicitModel m(rc, pc, 1);
  DatasetSplit empty = split;
  empty.train = {0, 0};
  CHECK_THROWS_AS(train_explicit(corpus, empty, encoded, m, explicit_train_defaults()), DataError);
}

TEST_CASE("checkpoint loading validates names and shapes") {
  ExplicitModel m(toy_config(true), toy_config(true), 1);
  auto ck = make_checkpoint(m.config_json(), m.parameters());
  ExplicitModel other(toy_config(false), toy_config(false), 1);
  auto ck2 = make_checkpoint(other.config_json(), other.parameters());
  CHECK_THROWS_AS(restore_parameters(ck2, m.parameters()), DataError);
  ck.tensors.at("explicit.resume.fm.w") = Tensor({3});
  CHECK_THROWS_AS(restore_parameters(ck, m.parameters()), DataError);
}

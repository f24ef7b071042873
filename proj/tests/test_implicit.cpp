#include <cmath>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "pjfit/errors.hpp"
#include "pjfit/grad_check.hpp"
#include "pjfit/implicit_model.hpp"
#include "test_helpers.hpp"

using namespace pjfit;

namespace {

struct Events {
  std::vector<Tensor> resumes, posts;
  std::vector<HistoryEvent> events;
};

Events make_events(std::size_t n, std::size_t d_e, Rng& rng) {
  Events e;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor r({d_e}), p({d_e});
    r.fill(static_cast<double>(i + 1));
    for (double& v : p.values()) v = rng.uniform(-1, 1);
    e.resumes.push_back(r);
    e.posts.push_back(p);
  }
  for (std::size_t i = 0; i < n; ++i)
    e.events.push_back({e.resumes[i].values(), e.posts[i].values(),
                        i % 2 ? Decision::Reject : Decision::Accept});
  return e;
}

int decision_code(const Tensor& item, std::size_t d_e) {
  return static_cast<int>(item[d_e]) * 10 + static_cast<int>(item[d_e + 1]);
}

GeneratorConfig drift_config(std::size_t applications) {
  GeneratorConfig g;
  g.candidates = applications / 4;
  g.posts = 40;
  g.applications = applications;
  g.drift = 0.5;
  return g;
}

}  // namespace

TEST_CASE("history item layout") {
  const Tensor r = Tensor::vector({1, 2}), p = Tensor::vector({3, 4});
  CHECK(history_item({r.values(), p.values(), Decision::Accept}, 2) ==
        Tensor::vector({1, 2, 1, 0, 3, 4}));
  CHECK(history_item({r.values(), p.values(), Decision::Reject}, 2) ==
        Tensor::vector({1, 2, 0, 1, 3, 4}));
  CHECK(history_item({r.values(), p.values(), Decision::Pad}, 2) ==
        Tensor::vector({1, 2, 0, 0, 3, 4}));
  CHECK(pad_item(128).size() == 258);
  CHECK_THROWS_AS(history_item({r.values(), p.values(), Decision::Accept}, 3), ShapeError);
}

TEST_CASE("encode_history pads on the left and keeps the most recent items") {
  Rng rng(1);
  const auto cold = encode_history({}, 5, 3);
  REQUIRE(cold.size() == 5);
  for (const auto& item : cold) CHECK(item == pad_item(3));

  auto seven = make_events(7, 3, rng);
  const auto kept = encode_history(seven.events, 5, 3);
  REQUIRE(kept.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) CHECK(kept[k][0] == static_cast<double>(k + 3));

  auto one = make_events(1, 3, rng);
  const auto padded = encode_history(one.events, 3, 3);
  CHECK(padded[0] == pad_item(3));
  CHECK(padded[1] == pad_item(3));
  CHECK(decision_code(padded[2], 3) == 10);
}

TEST_CASE("encode_history invariants on random histories") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d_e = 1 + rng.index(4), n = rng.index(30), max_len = 1 + rng.index(20);
    auto e = make_events(n, d_e, rng);
    const auto seq = encode_history(e.events, max_len, d_e);
    REQUIRE(seq.size() == max_len);
    const std::size_t kept = std::min(n, max_len);
    for (std::size_t k = 0; k < max_len; ++k) {
      CHECK(seq[k].size() == 2 * d_e + 2);
      const int code = decision_code(seq[k], d_e);
      CHECK((code == 10 || code == 1 || code == 0));
      if (k < max_len - kept) {
        CHECK(seq[k] == pad_item(d_e));
      } else {
        const std::size_t src = n - kept + (k - (max_len - kept));
        CHECK(seq[k][0] == static_cast<double>(src + 1));
      }
    }
  }
}

TEST_CASE("implicit tower output and determinism") {
  Rng rng(3);
  ImplicitTower tower("t", 10, 8, 6, 5, rng);
  const std::vector<Tensor> cold(5, pad_item(4));
  const Tensor a = implicit_embed(cold, tower);
  CHECK(a.size() == 6);
  CHECK(implicit_embed(cold, tower) == a);
  CHECK_THROWS_AS(implicit_embed(std::vector<Tensor>(4, pad_item(4)), tower), ShapeError);

  auto e = make_events(3, 4, rng);
  const auto seq = encode_history(e.events, 5, 4);
  const Tensor y = implicit_embed(seq, tower);
  CHECK(implicit_embed(seq, tower) == y);
  CHECK(y != a);

  // Starting from the shared pad chain gives the same numbers.
  const PadChain chain = tower.pad_chain();
  CHECK(tower.forward(seq, nullptr, &chain) == y);
  CHECK(tower.forward(cold, nullptr, &chain) == a);
}

TEST_CASE("implicit tower gradient check, direct and through the pad chain") {
  Rng rng(4);
  const std::size_t d_e = 4, len = 3;
  ImplicitTower tower("t", 2 * d_e + 2, 8, 5, len, rng);
  std::vector<std::vector<Tensor>> seqs;
  for (std::size_t n : {0u, 1u, 3u, 5u}) {
    auto e = make_events(n, d_e, rng);
    for (auto& r : e.resumes)
      for (double& v : r.values()) v = rng.uniform(-1, 1);
    seqs.push_back(encode_history(e.events, len, d_e));
  }
  std::vector<Tensor> proj;
  for (std::size_t k = 0; k < seqs.size(); ++k) proj.push_back(testing::random_like(Tensor({5}), rng));
  auto params = tower.parameters();
  auto loss = [&] {
    double l = 0;
    for (std::size_t k = 0; k < seqs.size(); ++k) l += testing::project(tower.forward(seqs[k]), proj[k]);
    return l;
  };
  ImplicitTower::Trace trace;
  SUBCASE("direct") {
    const auto report = nn::grad_check(
        params, loss,
        [&] {
          for (std::size_t k = 0; k < seqs.size(); ++k) {
            tower.forward(seqs[k], &trace);
            tower.backward(trace, proj[k]);
          }
        },
        1e-4);
    CHECK(report.passed);
  }
  SUBCASE("pad chain") {
    const auto report = nn::grad_check(
        params, loss,
        [&] {
          PadChain chain = tower.pad_chain();
          for (std::size_t k = 0; k < seqs.size(); ++k) {
            tower.forward(seqs[k], &trace, &chain);
            tower.backward(trace, proj[k], &chain);
          }
          tower.backward_chain(chain);
        },
        1e-4);
    CHECK(report.passed);
  }
  ImplicitTower::Trace empty;
  CHECK_THROWS_AS(tower.backward(empty, proj[0]), ShapeError);
}

TEST_CASE("fused toy model gradient check (BCE head over both towers)") {
  ImplicitConfig c;
  c.d_e = 4;
  c.hidden = 8;
  c.d_i = 3;
  c.max_post_history = 3;
  c.max_candidate_history = 2;
  ImplicitModel model(c, 5);
  Rng rng(6);
  std::vector<std::vector<Tensor>> ps, cs;
  for (int k = 0; k < 3; ++k) {
    auto e = make_events(k + 1, 4, rng);
    for (auto& r : e.resumes)
      for (double& v : r.values()) v = rng.uniform(-1, 1);
    ps.push_back(encode_history(e.events, 3, 4));
    cs.push_back(encode_history(std::span(e.events).first(k), 2, 4));
  }
  const std::vector<double> offset{0.3, -0.2, 0.1};
  const std::vector<int> labels{1, 0, 1};
  auto params = model.parameters();
  auto loss = [&] {
    double l = 0;
    for (int k = 0; k < 3; ++k) {
      const double z = offset[k] + dot(model.candidate.forward(cs[k]).values(),
                                       model.post.forward(ps[k]).values());
      l += nn::bce_loss(nn::sigmoid(z), labels[k]);
    }
    return l;
  };
  ImplicitTower::Trace tc, tp;
  auto fb = [&] {
    for (int k = 0; k < 3; ++k) {
      Tensor f = model.candidate.forward(cs[k], &tc);
      Tensor g = model.post.forward(ps[k], &tp);
      const double dz = nn::bce_logit_grad(offset[k] + dot(f.values(), g.values()), labels[k]);
      Tensor df = g, dg = f;
      for (double& v : df.values()) v *= dz;
      for (double& v : dg.values()) v *= dz;
      model.candidate.backward(tc, df);
      model.post.backward(tp, dg);
    }
  };
  CHECK(nn::grad_check(params, loss, fb, 1e-4).passed);
}

TEST_CASE("history sequences never see the query record") {
  const Corpus corpus = generate_synthetic(drift_config(400), 8);
  ExplicitEmbeddings emb;
  emb.d_e = 2;
  Rng rng(1);
  for (std::size_t i = 0; i < corpus.records.size(); ++i)
    emb.resumes.push_back(Tensor::vector({rng.uniform(), rng.uniform()}));
  for (const auto& [id, doc] : corpus.posts) emb.posts.emplace(id, Tensor::vector({0.5, -0.5}));
  ImplicitConfig c;
  c.d_e = 2;
  const HistoryIndex index(corpus);
  for (std::size_t i = 0; i < corpus.records.size(); i += 7) {
    const auto seq = history_sequences(corpus, index, emb, i, c);
    Corpus flipped = corpus;
    flipped.records[i].label = 1 - flipped.records[i].label;
    const HistoryIndex flipped_index(flipped);
    const auto seq2 = history_sequences(flipped, flipped_index, emb, i, c);
    CHECK(seq.post == seq2.post);
    CHECK(seq.candidate == seq2.candidate);
    for (const auto& item : seq.candidate) {
      // The query resume embedding is unique, so it can never appear.
      CHECK_FALSE((item[0] == emb.resumes[i][0] && item[1] == emb.resumes[i][1]));
    }
  }
}

TEST_CASE("implicit training runs, is reproducible and validates its inputs") {
  const Corpus corpus = generate_synthetic(drift_config(1200), 9);
  const auto split = split_chronological(corpus, 0.2, 0.2);
  const auto schemas = fit_schema(corpus, split);
  ExplicitConfig base;
  base.d_e = 6;
  base.d_fm = 3;
  base.hidden = {8};
  base.use_text = false;
  const auto rc = explicit_config_for(schemas.resume, base);
  const auto pc = explicit_config_for(schemas.post, base);
  const auto encoded = encode_corpus(corpus, schemas, rc.text, pc.text);
  ExplicitModel explicit_model(rc, pc, 1);
  TrainConfig et = explicit_train_defaults();
  et.epochs = 2;
  train_explicit(corpus, split, encoded, explicit_model, et);
  const auto emb = embed_all(corpus, encoded, explicit_model);

  ImplicitConfig c;
  c.d_e = 6;
  c.hidden = 8;
  c.d_i = 4;
  TrainConfig tc = implicit_train_defaults();
  tc.epochs = 2;
  for (auto objective : {ImplicitObjective::Residual, ImplicitObjective::Standalone}) {
    c.objective = objective;
    ImplicitModel a(c, 2), b(c, 2);
    const auto ra = train_implicit(corpus, split, emb, a, tc);
    const auto rb = train_implicit(corpus, split, emb, b, tc);
    REQUIRE(ra.log.size() == 2);
    CHECK(ra.log[1].train_loss == rb.log[1].train_loss);
    CHECK(ra.best_validation_auc == rb.best_validation_auc);
    CHECK(implicit_logits(corpus, emb, a, split.test) == implicit_logits(corpus, emb, b, split.test));
    CHECK(implicit_config_from_json(a.config_json()) == c);
  }

  ImplicitModel m(c, 1);
  CHECK_THROWS_AS(train_implicit(corpus, split, ExplicitEmbeddings{}, m, tc), DataError);
  c.d_e = 7;
  ImplicitModel wrong(c, 1);
  CHECK_THROWS_AS(train_implicit(corpus, split, emb, wrong, tc), DataError);
}

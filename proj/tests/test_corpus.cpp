#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "pjfit/corpus.hpp"
#include "pjfit/errors.hpp"
#include "pjfit/io.hpp"

using namespace pjfit;
namespace fs = std::filesystem;

namespace {

GeneratorConfig tiny(double drift = 0.0, double noise = 0.0) {
  GeneratorConfig c;
  c.candidates = 10;
  c.posts = 3;
  c.applications = 30;
  c.drift = drift;
  c.label_noise = noise;
  return c;
}

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("pjfit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Recomputes the planted match score from the stored latent state only.
double oracle_match(const Corpus& c, std::size_t i) {
  const auto& rec = c.records[i];
  const auto& cand = c.truth.candidates[rec.candidate.value];
  const auto& post = c.truth.posts[rec.post.value];
  const std::uint32_t skills = c.truth.record_skills[i];
  double held = 0;
  for (int k : post.required) held += (skills >> k) & 1u;
  const double quality = 0.4 * cand.tier_level / 3.0 + 0.3 * cand.degree_level / 2.0 +
                         0.3 * std::min(cand.years, 15) / 15.0;
  return c.config.skill_weight * held / post.required.size() + c.config.quality_weight * quality +
         c.config.text_weight * (cand.leadership ? 1 : 0);
}

}  // namespace

TEST_CASE("noise-free, drift-free labels are a threshold of latent scores") {
  const Corpus c = generate_synthetic(tiny(), 7);
  REQUIRE(c.records.size() == 30);
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto& post = c.truth.posts[c.records[i].post.value];
    const int expected = oracle_match(c, i) > 0.25 * post.seniority + c.truth.bar_offset ? 1 : 0;
    CHECK(c.records[i].label == expected);
  }
}

TEST_CASE("generation is deterministic in (config, seed)") {
  const auto dir = temp_dir("determinism");
  save_corpus(generate_synthetic(tiny(), 7), dir / "a.jsonl");
  save_corpus(generate_synthetic(tiny(), 7), dir / "b.jsonl");
  CHECK(read_file(dir / "a.jsonl") == read_file(dir / "b.jsonl"));
  CHECK(read_file(dir / "a.posts.jsonl") == read_file(dir / "b.posts.jsonl"));
  CHECK(read_file(dir / "a.manifest.json") == read_file(dir / "b.manifest.json"));
  CHECK_FALSE(generate_synthetic(tiny(), 8) == generate_synthetic(tiny(), 7));
}

TEST_CASE("drift flips at least one label on a busy post") {
  const Corpus a = generate_synthetic(tiny(0.0), 7);
  const Corpus b = generate_synthetic(tiny(0.5), 7);
  std::map<std::uint32_t, int> per_post;
  for (const auto& r : a.records) ++per_post[r.post.value];
  bool flipped = false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (per_post[a.records[i].post.value] >= 3 && a.records[i].label != b.records[i].label) {
      flipped = true;
    }
  }
  CHECK(flipped);
}

TEST_CASE("generator rejects bad configurations") {
  auto c = tiny();
  c.candidates = 0;
  CHECK_THROWS_AS(generate_synthetic(c, 1), ConfigError);
  c = tiny();
  c.posts = 0;
  CHECK_THROWS_AS(generate_synthetic(c, 1), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(tiny(-0.1), 1), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(tiny(0.0, 0.5), 1), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(tiny(0.0, -0.01), 1), ConfigError);
}

TEST_CASE("records are time ordered with per-candidate sequence numbers") {
  GeneratorConfig cfg;
  cfg.candidates = 50;
  cfg.posts = 10;
  cfg.applications = 400;
  const Corpus c = generate_synthetic(cfg, 3);
  std::map<std::uint32_t, std::uint32_t> last_k;
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto& r = c.records[i];
    if (i > 0) CHECK(r.review_time > c.records[i - 1].review_time);
    CHECK((r.label == 0 || r.label == 1));
    CHECK(r.seq_index == last_k[r.candidate.value] + 1);
    last_k[r.candidate.value] = r.seq_index;
    CHECK(c.posts.contains(r.post));
    CHECK_FALSE(r.resume.fields.empty());
  }
}

TEST_CASE("base rate is achieved within 5 points on 10k applications") {
  for (double rate : {0.2, 0.3, 0.5}) {
    for (double drift : {0.0, 0.5}) {
      GeneratorConfig cfg;
      cfg.applications = 10000;
      cfg.base_rate = rate;
      cfg.drift = drift;
      cfg.label_noise = 0.05;
      const Corpus c = generate_synthetic(cfg, 11);
      double pos = 0;
      for (const auto& r : c.records) pos += r.label;
      CHECK(std::abs(pos / c.records.size() - rate) <= 0.05);
    }
  }
}

TEST_CASE("chronological split arithmetic") {
  auto with_n = [](std::size_t n) {
    Corpus c;
    c.records.resize(n);
    return c;
  };
  auto s = split_chronological(with_n(10), 0.2, 0.2);
  CHECK(s.train == IndexRange{0, 6});
  CHECK(s.validation == IndexRange{6, 8});
  CHECK(s.test == IndexRange{8, 10});

  s = split_chronological(with_n(3), 0.34, 0.34);
  CHECK(s.train.size() == 1);
  CHECK(s.validation.size() == 1);
  CHECK(s.test.size() == 1);

  // 1.3M records with 100K validation and 100K test blocks.
  s = split_chronological(with_n(1'300'000), 100'000.0 / 1'300'000, 100'000.0 / 1'300'000);
  CHECK(s.test.size() == 100'000);
  CHECK(s.validation.size() == 100'000);
  CHECK(s.train.size() == 1'100'000);

  CHECK_THROWS_AS(split_chronological(with_n(2), 0.2, 0.2), DataError);
  CHECK_THROWS_AS(split_chronological(with_n(10), 0.5, 0.5), ConfigError);
  CHECK_THROWS_AS(split_chronological(with_n(10), 0.0, 0.2), ConfigError);
}

TEST_CASE("history of a cold start is empty") {
  const Corpus c = generate_synthetic(tiny(), 7);
  const History h = history_before(c, 0);
  CHECK(h.post_history.empty());
  CHECK(h.candidate_history.empty());
}

TEST_CASE("post history filters earlier applications") {
  Corpus c;
  c.posts[PostId{0}] = PostDoc{{{"position", {{"title", "x"}}}}, {}};
  c.posts[PostId{1}] = PostDoc{{{"position", {{"title", "y"}}}}, {}};
  const std::int64_t times[] = {1, 2, 4, 6, 9};
  const std::uint32_t posts[] = {0, 1, 0, 1, 0};
  for (int i = 0; i < 5; ++i) {
    ApplicationRecord r;
    r.candidate = CandidateId{static_cast<std::uint32_t>(i)};
    r.post = PostId{posts[i]};
    r.review_time = times[i];
    c.records.push_back(r);
  }
  const History h = history_before(c, 4);
  REQUIRE(h.post_history.size() == 2);
  CHECK(c.records[h.post_history[0]].review_time == 1);
  CHECK(c.records[h.post_history[1]].review_time == 4);
  CHECK(HistoryIndex(c).before(4) == h);
}

TEST_CASE("indexed history agrees with the linear scan on every record") {
  GeneratorConfig cfg;
  cfg.candidates = 40;
  cfg.posts = 12;
  cfg.applications = 300;
  const Corpus c = generate_synthetic(cfg, 5);
  const HistoryIndex index(c);
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    // O(N^2) oracle written out independently of both implementations.
    History brute;
    for (std::size_t j = 0; j < c.records.size(); ++j) {
      if (c.records[j].review_time >= c.records[i].review_time) continue;
      if (c.records[j].post == c.records[i].post) brute.post_history.push_back(j);
      if (c.records[j].candidate == c.records[i].candidate) brute.candidate_history.push_back(j);
    }
    const History fast = index.before(i);
    CHECK(fast == brute);
    CHECK(history_before(c, i) == brute);
    for (auto list : {fast.post_history, fast.candidate_history}) {
      CHECK(std::find(list.begin(), list.end(), i) == list.end());
      for (std::size_t k = 1; k < list.size(); ++k) {
        CHECK(c.records[list[k - 1]].review_time < c.records[list[k]].review_time);
      }
    }
  }
}

TEST_CASE("corpus file round trip is the identity") {
  const auto dir = temp_dir("roundtrip");
  GeneratorConfig cfg;
  cfg.candidates = 30;
  cfg.posts = 8;
  cfg.applications = 120;
  cfg.drift = 0.3;
  cfg.label_noise = 0.1;
  const Corpus c = generate_synthetic(cfg, 21);
  save_corpus(c, dir / "c.jsonl");
  const Corpus back = load_corpus(dir / "c.jsonl");
  CHECK(back == c);
  save_corpus(back, dir / "d.jsonl");
  CHECK(read_file(dir / "c.jsonl") == read_file(dir / "d.jsonl"));
}

TEST_CASE("loading rejects malformed and inconsistent files") {
  const auto dir = temp_dir("malformed");
  save_corpus(generate_synthetic(tiny(), 7), dir / "c.jsonl");
  CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl"), DataError);

  auto text = read_file(dir / "c.jsonl");
  write_file_atomic(dir / "c.jsonl", "{not json\n" + text);
  CHECK_THROWS_AS(load_corpus(dir / "c.jsonl"), DataError);

  // Unknown post id.
  auto pos = text.find("\"post\":");
  auto end = text.find(',', pos);
  write_file_atomic(dir / "c.jsonl", text.substr(0, pos) + "\"post\":999" + text.substr(end));
  CHECK_THROWS_AS(load_corpus(dir / "c.jsonl"), DataError);
}

TEST_CASE("shuffled labels keep the label multiset") {
  GeneratorConfig cfg;
  cfg.applications = 500;
  cfg.candidates = 100;
  cfg.posts = 20;
  const Corpus c = generate_synthetic(cfg, 2);
  const Corpus s = shuffle_labels(c, 9);
  int a = 0, b = 0, moved = 0;
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    a += c.records[i].label;
    b += s.records[i].label;
    moved += c.records[i].label != s.records[i].label;
  }
  CHECK(a == b);
  CHECK(moved > 0);
}

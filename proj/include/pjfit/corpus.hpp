#pragma once

// Data model for applications (candidate, resume, post, label, review time),
// the synthetic corpus generator, chronological splits and history lookup.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pjfit {

struct CandidateId {
  std::uint32_t value = 0;
  friend auto operator<=>(const CandidateId&, const CandidateId&) = default;
};

struct PostId {
  std::uint32_t value = 0;
  friend auto operator<=>(const PostId&, const PostId&) = default;
};

// Parsed resume or job post: named sections of key/value text plus
// free-text sentences in document order.
struct Document {
  std::map<std::string, std::map<std::string, std::string>> fields;
  std::vector<std::string> sentences;

  // Empty string when the section or key is absent.
  const std::string& get(const std::string& section, const std::string& key) const;

  friend bool operator==(const Document&, const Document&) = default;
};

using ResumeDoc = Document;
using PostDoc = Document;

struct ApplicationRecord {
  CandidateId candidate;
  ResumeDoc resume;
  PostId post;
  int label = 0;
  std::int64_t review_time = 0;
  std::uint32_t seq_index = 0;  // k-th application of this candidate, from 1

  friend bool operator==(const ApplicationRecord&, const ApplicationRecord&) = default;
};

struct GeneratorConfig {
  std::size_t candidates = 2300;
  std::size_t posts = 350;
  std::size_t applications = 7000;
  // Number of skill dimensions in the latent vectors (at most the size of
  // the skill catalogue).
  std::size_t latent_dim = 12;
  std::size_t required_skills = 3;
  // Drift strength: after an accept the post's bar moves by
  // drift * (applicant match - bar); after a reject it relaxes toward its
  // base by drift * relax_fraction * (base - bar).
  double drift = 0.0;
  double relax_fraction = 0.25;
  // Probability that a label is flipped after thresholding.
  double label_noise = 0.0;
  // Target fraction of accepted applications.
  double base_rate = 0.3;
  double skill_weight = 1.0;
  double quality_weight = 1.0;
  // Contribution of the leadership trait, which only appears in free text.
  double text_weight = 0.3;
  // Probability that a candidate's skill set changes before a repeat
  // application.
  double mutation_prob = 0.05;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

// Latent state behind a generated corpus, kept so labels and extracted
// entities can be checked against ground truth.
struct CandidateTruth {
  int tier_level = 0;    // 0 unranked .. 3 top50
  int degree_level = 0;  // 0 bachelor, 1 master, 2 phd
  int years = 0;
  bool leadership = false;
  friend bool operator==(const CandidateTruth&, const CandidateTruth&) = default;
};

struct PostTruth {
  std::vector<int> required;  // skill indices, ascending
  int seniority = 0;          // 0 junior .. 3 lead
  friend bool operator==(const PostTruth&, const PostTruth&) = default;
};

struct PlantedTruth {
  double bar_offset = 0.0;
  std::vector<CandidateTruth> candidates;  // indexed by CandidateId
  std::vector<PostTruth> posts;            // indexed by PostId
  std::vector<std::uint32_t> record_skills;  // skill bitmask per record
  friend bool operator==(const PlantedTruth&, const PlantedTruth&) = default;
};

struct Corpus {
  std::vector<ApplicationRecord> records;  // ascending review_time
  std::map<PostId, PostDoc> posts;
  GeneratorConfig config;
  std::uint64_t seed = 0;
  PlantedTruth truth;

  const PostDoc& post(PostId id) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Skill names, in latent-dimension order.
const std::vector<std::string>& skill_catalogue();

// Base acceptance bar of a post before the calibrated offset.
double base_bar(const PostTruth& post);
// Noise-free match score of a candidate with a given skill set for a post.
double match_score(const GeneratorConfig& config, const CandidateTruth& candidate,
                   std::uint32_t skills, const PostTruth& post);

// Deterministic in (config, seed). Throws ConfigError for empty
// populations or out-of-range drift/noise.
Corpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

// Same corpus with labels permuted (no-signal control).
Corpus shuffle_labels(const Corpus& corpus, std::uint64_t seed);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct DatasetSplit {
  IndexRange train;
  IndexRange validation;
  IndexRange test;
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Test is the last round(test_fraction*N) records (at least one), validation
// the block before it, train the rest.
DatasetSplit split_chronological(const Corpus& corpus, double val_fraction, double test_fraction);

// Indices of earlier applications to the same post and by the same
// candidate, in review order. The query record is never included.
struct History {
  std::vector<std::size_t> post_history;
  std::vector<std::size_t> candidate_history;
  friend bool operator==(const History&, const History&) = default;
};

// Linear scan.
History history_before(const Corpus& corpus, std::size_t record);

// Per-post and per-candidate record lists for O(log n) history lookups.
class HistoryIndex {
 public:
  explicit HistoryIndex(const Corpus& corpus);
  History before(std::size_t record) const;

 private:
  const Corpus* corpus_;
  std::map<PostId, std::vector<std::size_t>> by_post_;
  std::map<CandidateId, std::vector<std::size_t>> by_candidate_;
};

// File layout for a corpus written to `records_path` (e.g. c.jsonl):
// records JSONL, posts sidecar (c.posts.jsonl), manifest (c.manifest.json).
struct CorpusFiles {
  std::filesystem::path records;
  std::filesystem::path posts;
  std::filesystem::path manifest;
};

CorpusFiles corpus_files(const std::filesystem::path& records_path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& records_path);
// Throws DataError on malformed files or unresolved post ids.
Corpus load_corpus(const std::filesystem::path& records_path);

inline constexpr int kCorpusFormatVersion = 1;

}  // namespace pjfit

#include "pjfit/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pjfit/errors.hpp"
#include "pjfit/io.hpp"
#include "pjfit/resources.hpp"
#include "pjfit/rng.hpp"

namespace pjfit {

using nlohmann::json;

namespace {

const std::vector<std::string> kCities = {"shenzhen", "beijing",  "shanghai",
                                          "singapore", "hangzhou", "guangzhou"};
const std::vector<std::string> kMajors = {"computer science", "electrical engineering",
                                          "mathematics",      "statistics",
                                          "physics",          "business"};
const std::vector<std::string> kPositions = {"software engineer", "data analyst",
                                             "data scientist",    "product manager",
                                             "qa engineer",       "researcher"};
const std::vector<std::string> kCertifications = {"none", "aws", "pmp", "cisco", "cfa"};
const std::vector<std::string> kTitles = {"backend engineer",  "data scientist",
                                          "ml engineer",       "analyst",
                                          "frontend engineer", "security engineer"};
const std::vector<std::string> kSeniority = {"junior", "mid", "senior", "lead"};
const std::vector<std::string> kIndustries = {"finance", "insurance", "healthcare", "retail",
                                              "technology"};
const std::vector<std::string> kDegrees = {"bachelor", "master", "phd"};
const std::vector<std::string> kHobbies = {
    "enjoys hiking on weekends",      "plays chess in a local club",
    "volunteers at a coding school",  "writes a personal tech blog",
    "likes photography and travel",   "runs half marathons"};
constexpr std::size_t kUniversities = 60;

// Attributes drawn once per candidate; the resume is a pure function of
// these plus the current skill set.
struct CandidateState {
  CandidateTruth truth;
  int gender = 0;
  std::size_t city = 0;
  std::size_t university = 1;
  std::size_t major = 0;
  double gpa = -1.0;  // negative when not reported
  std::size_t position = 0;
  int companies = 1;
  std::size_t certification = 0;
  int age = 22;
  int team = 3;
  std::uint64_t style = 0;
  std::uint32_t skills = 0;
};

struct PostState {
  PostTruth truth;
  std::size_t title = 0;
  std::size_t city = 0;
  bool remote = false;
  std::size_t industry = 0;
  int min_degree = 0;
  int min_years = 0;
  int salary = 0;
  int team_size = 0;
  std::uint64_t style = 0;
};

std::string surface(const std::string& kind, const std::string& canonical, std::uint64_t style) {
  const auto forms = ResourceTables::builtin().surfaces(kind, canonical);
  if (forms.empty()) return canonical;
  return forms[style % forms.size()];
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  x ^= x >> 31;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  return x;
}

std::vector<int> skill_list(std::uint32_t mask) {
  std::vector<int> out;
  for (int k = 0; k < 32; ++k) {
    if (mask & (1u << k)) out.push_back(k);
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i != 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string format_gpa(double gpa) {
  std::ostringstream s;
  s.precision(1);
  s << std::fixed << gpa;
  return s.str();
}

ResumeDoc emit_resume(const CandidateState& c) {
  const auto& skills = skill_catalogue();
  ResumeDoc doc;
  doc.fields["demographics"] = {{"gender", c.gender == 0 ? "female" : "male"},
                                {"age", std::to_string(c.age)},
                                {"location", kCities[c.city]}};
  const std::string uni = "U" + std::to_string(c.university);
  auto& edu = doc.fields["education"];
  edu["university"] = surface("university", uni, mix(c.style, 1));
  edu["degree"] = surface("degree", kDegrees[c.truth.degree_level], mix(c.style, 2));
  edu["major"] = kMajors[c.major];
  if (c.gpa >= 0.0) edu["gpa"] = format_gpa(c.gpa);
  doc.fields["experience"] = {{"years", std::to_string(c.truth.years) + " years"},
                              {"last_position", kPositions[c.position]},
                              {"companies", std::to_string(c.companies)}};
  std::vector<std::string> held;
  for (int k : skill_list(c.skills)) {
    held.push_back(surface("skill", skills[k], mix(c.style, 100 + k)));
  }
  doc.fields["skills"] = {{"list", join(held, ", ")}};
  doc.fields["certification"] = {{"name", kCertifications[c.certification]}};

  auto& s = doc.sentences;
  const std::string& pos = kPositions[c.position];
  if (c.truth.years > 0) {
    s.push_back("worked as a " + pos + " for " + std::to_string(c.truth.years) + " years");
  } else {
    s.push_back("recent graduate looking for a first " + pos + " role");
  }
  const std::string topic = held.empty() ? "internal" : held.front();
  if (c.truth.leadership) {
    s.push_back("led a team of " + std::to_string(c.team) + " engineers delivering " + topic +
                " projects");
  } else {
    s.push_back("worked as an individual contributor on " + topic + " projects");
  }
  for (std::size_t i = 0; i < held.size(); i += 2) {
    if (i + 1 < held.size()) {
      s.push_back("hands on experience with " + held[i] + " and " + held[i + 1]);
    } else {
      s.push_back("hands on experience with " + held[i]);
    }
  }
  s.push_back("studied " + kMajors[c.major] + " at " + edu["university"]);
  s.push_back(kHobbies[c.style % kHobbies.size()]);
  return doc;
}

PostDoc emit_post(const PostState& p) {
  const auto& skills = skill_catalogue();
  PostDoc doc;
  doc.fields["position"] = {{"title", kTitles[p.title]},
                            {"seniority", kSeniority[p.truth.seniority]},
                            {"location", kCities[p.city]},
                            {"remote", p.remote ? "yes" : "no"},
                            {"industry", kIndustries[p.industry]}};
  std::vector<std::string> req;
  for (int k : p.truth.required) {
    req.push_back(surface("skill", skills[k], mix(p.style, 100 + k)));
  }
  doc.fields["requirements"] = {
      {"skills", join(req, ", ")},
      {"degree", surface("degree", kDegrees[p.min_degree], mix(p.style, 2))},
      {"years", std::to_string(p.min_years) + "+ years"}};
  doc.fields["compensation"] = {{"salary", std::to_string(p.salary)},
                                {"team_size", std::to_string(p.team_size)}};

  auto& s = doc.sentences;
  s.push_back("we are hiring a " + kSeniority[p.truth.seniority] + " " + kTitles[p.title] +
              " in " + kCities[p.city]);
  for (const auto& r : req) s.push_back("the role requires strong " + r + " skills");
  s.push_back("you will join a team of " + std::to_string(p.team_size) + " people");
  s.push_back("we are a " + kIndustries[p.industry] + " company");
  s.push_back(p.remote ? "remote work is possible" : "this role is on site");
  return doc;
}

CandidateState draw_candidate(const GeneratorConfig& cfg, Rng& rng) {
  CandidateState c;
  c.gender = static_cast<int>(rng.index(2));
  c.city = rng.index(kCities.size());
  c.university = 1 + rng.index(kUniversities);
  c.truth.tier_level = university_tier_level(
      ResourceTables::builtin().university_rank("U" + std::to_string(c.university)));
  const double d = rng.uniform();
  c.truth.degree_level = d < 0.5 ? 0 : (d < 0.85 ? 1 : 2);
  c.major = rng.index(kMajors.size());
  const double gpa = 2.5 + 0.1 * static_cast<double>(rng.index(16));
  c.gpa = rng.bernoulli(0.1) ? -1.0 : gpa;
  c.truth.years = static_cast<int>(rng.index(16));
  c.age = 22 + c.truth.years + static_cast<int>(rng.index(5));
  c.position = rng.index(kPositions.size());
  c.companies = 1 + c.truth.years / 4 + static_cast<int>(rng.index(2));
  c.certification = rng.index(kCertifications.size());
  c.truth.leadership = rng.bernoulli(0.3);
  c.team = 3 + static_cast<int>(rng.index(8));
  c.style = rng.next();
  for (std::size_t k = 0; k < cfg.latent_dim; ++k) {
    if (rng.bernoulli(0.4)) c.skills |= 1u << k;
  }
  return c;
}

PostState draw_post(const GeneratorConfig& cfg, Rng& rng) {
  PostState p;
  p.title = rng.index(kTitles.size());
  p.truth.seniority = static_cast<int>(rng.index(kSeniority.size()));
  p.city = rng.index(kCities.size());
  p.remote = rng.bernoulli(0.3);
  p.industry = rng.index(kIndustries.size());
  p.min_degree = static_cast<int>(rng.index(kDegrees.size()));
  p.min_years = 2 * p.truth.seniority + static_cast<int>(rng.index(2));
  p.salary = 50000 + 20000 * p.truth.seniority + 1000 * static_cast<int>(rng.index(20));
  p.team_size = 3 + static_cast<int>(rng.index(13));
  p.style = rng.next();
  std::vector<int> dims(cfg.latent_dim);
  for (std::size_t k = 0; k < dims.size(); ++k) dims[k] = static_cast<int>(k);
  rng.shuffle(dims);
  const std::size_t n_req = std::min(cfg.required_skills, cfg.latent_dim);
  p.truth.required.assign(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(n_req));
  std::sort(p.truth.required.begin(), p.truth.required.end());
  return p;
}

// Sampling proportional to log-normal activity weights.
class WeightedPicker {
 public:
  WeightedPicker(std::size_t n, Rng& rng) : cumulative_(n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += std::exp(0.8 * rng.normal());
      cumulative_[i] = total;
    }
  }
  std::size_t pick(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

// Replays the review stream with a given bar offset and returns labels.
std::vector<int> simulate_labels(const GeneratorConfig& cfg, const std::vector<double>& match,
                                 const std::vector<std::uint32_t>& post_of,
                                 const std::vector<double>& base, const std::vector<double>& flip,
                                 double offset) {
  std::vector<double> bar(base.size());
  for (std::size_t p = 0; p < base.size(); ++p) bar[p] = base[p] + offset;
  std::vector<int> labels(match.size());
  for (std::size_t i = 0; i < match.size(); ++i) {
    const std::uint32_t p = post_of[i];
    int label = match[i] > bar[p] ? 1 : 0;
    if (flip[i] < cfg.label_noise) label = 1 - label;
    labels[i] = label;
    if (label == 1) {
      bar[p] += cfg.drift * (match[i] - bar[p]);
    } else {
      bar[p] += cfg.drift * cfg.relax_fraction * (base[p] + offset - bar[p]);
    }
  }
  return labels;
}

void validate(const GeneratorConfig& cfg) {
  if (cfg.candidates == 0) throw ConfigError("generator: zero candidates");
  if (cfg.posts == 0) throw ConfigError("generator: zero posts");
  if (cfg.applications == 0) throw ConfigError("generator: zero applications");
  if (cfg.latent_dim == 0 || cfg.latent_dim > skill_catalogue().size()) {
    throw ConfigError("generator: latent_dim must be in [1, " +
                      std::to_string(skill_catalogue().size()) + "]");
  }
  if (cfg.required_skills == 0) throw ConfigError("generator: required_skills must be >= 1");
  if (!(cfg.drift >= 0.0 && cfg.drift <= 1.0)) {
    throw ConfigError("generator: drift must be in [0, 1]");
  }
  if (!(cfg.relax_fraction >= 0.0 && cfg.relax_fraction <= 1.0)) {
    throw ConfigError("generator: relax_fraction must be in [0, 1]");
  }
  if (!(cfg.label_noise >= 0.0 && cfg.label_noise < 0.5)) {
    throw ConfigError("generator: label_noise must be in [0, 0.5)");
  }
  if (!(cfg.base_rate > 0.0 && cfg.base_rate < 1.0)) {
    throw ConfigError("generator: base_rate must be in (0, 1)");
  }
  if (!(cfg.mutation_prob >= 0.0 && cfg.mutation_prob <= 1.0)) {
    throw ConfigError("generator: mutation_prob must be in [0, 1]");
  }
}

}  // namespace

const std::string& Document::get(const std::string& section, const std::string& key) const {
  static const std::string empty;
  auto s = fields.find(section);
  if (s == fields.end()) return empty;
  auto k = s->second.find(key);
  return k == s->second.end() ? empty : k->second;
}

const PostDoc& Corpus::post(PostId id) const {
  auto it = posts.find(id);
  if (it == posts.end()) throw DataError("unknown post id " + std::to_string(id.value));
  return it->second;
}

const std::vector<std::string>& skill_catalogue() {
  static const std::vector<std::string> skills = {"python", "cpp",   "java",  "sql",
                                                  "ml",     "db",    "web",   "cloud",
                                                  "stats",  "devops", "mobile", "security"};
  return skills;
}

double base_bar(const PostTruth& post) { return 0.25 * post.seniority; }

double match_score(const GeneratorConfig& config, const CandidateTruth& candidate,
                   std::uint32_t skills, const PostTruth& post) {
  int overlap = 0;
  for (int k : post.required) overlap += (skills >> k) & 1u;
  const double skill_fit =
      post.required.empty() ? 0.0 : static_cast<double>(overlap) / post.required.size();
  const double quality = 0.4 * candidate.tier_level / 3.0 + 0.3 * candidate.degree_level / 2.0 +
                         0.3 * std::min(candidate.years, 15) / 15.0;
  return config.skill_weight * skill_fit + config.quality_weight * quality +
         config.text_weight * (candidate.leadership ? 1.0 : 0.0);
}

Corpus generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  validate(config);
  Rng root(seed);
  Rng cand_rng = root.fork(1);
  Rng post_rng = root.fork(2);
  Rng stream_rng = root.fork(3);
  Rng noise_rng = root.fork(4);

  std::vector<CandidateState> candidates;
  candidates.reserve(config.candidates);
  for (std::size_t i = 0; i < config.candidates; ++i) {
    candidates.push_back(draw_candidate(config, cand_rng));
  }
  std::vector<PostState> posts;
  posts.reserve(config.posts);
  for (std::size_t j = 0; j < config.posts; ++j) posts.push_back(draw_post(config, post_rng));

  Corpus corpus;
  corpus.config = config;
  corpus.seed = seed;
  for (std::size_t j = 0; j < posts.size(); ++j) {
    corpus.posts.emplace(PostId{static_cast<std::uint32_t>(j)}, emit_post(posts[j]));
    corpus.truth.posts.push_back(posts[j].truth);
  }

  const WeightedPicker cand_picker(config.candidates, stream_rng);
  const WeightedPicker post_picker(config.posts, stream_rng);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::uint32_t> applied(config.candidates, 0);
  std::vector<double> match;
  std::vector<std::uint32_t> post_of;
  corpus.records.reserve(config.applications);
  for (std::size_t t = 0; t < config.applications; ++t) {
    std::size_t c = 0, p = 0;
    for (int attempt = 0; attempt < 20; ++attempt) {
      c = cand_picker.pick(stream_rng);
      p = post_picker.pick(stream_rng);
      if (!seen.contains({c, p})) break;
    }
    seen.insert({c, p});
    CandidateState& cand = candidates[c];
    if (applied[c] > 0 && stream_rng.bernoulli(config.mutation_prob)) {
      cand.skills ^= 1u << stream_rng.index(config.latent_dim);
    }
    ApplicationRecord rec;
    rec.candidate = CandidateId{static_cast<std::uint32_t>(c)};
    rec.post = PostId{static_cast<std::uint32_t>(p)};
    rec.resume = emit_resume(cand);
    rec.review_time = static_cast<std::int64_t>(t) + 1;
    rec.seq_index = ++applied[c];
    corpus.records.push_back(std::move(rec));
    corpus.truth.record_skills.push_back(cand.skills);
    match.push_back(match_score(config, cand.truth, cand.skills, posts[p].truth));
    post_of.push_back(static_cast<std::uint32_t>(p));
  }
  for (const auto& c : candidates) corpus.truth.candidates.push_back(c.truth);

  std::vector<double> flip(config.applications);
  for (double& u : flip) u = noise_rng.uniform();
  std::vector<double> base(posts.size());
  for (std::size_t j = 0; j < posts.size(); ++j) base[j] = base_bar(posts[j].truth);

  // The acceptance rate falls as the offset grows; bisect for the target.
  double lo = -10.0, hi = 10.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto labels = simulate_labels(config, match, post_of, base, flip, mid);
    const double rate =
        static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / labels.size();
    if (rate > config.base_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  corpus.truth.bar_offset = hi;
  const auto labels = simulate_labels(config, match, post_of, base, flip, hi);
  for (std::size_t i = 0; i < labels.size(); ++i) corpus.records[i].label = labels[i];
  return corpus;
}

Corpus shuffle_labels(const Corpus& corpus, std::uint64_t seed) {
  Corpus out = corpus;
  std::vector<int> labels;
  for (const auto& r : corpus.records) labels.push_back(r.label);
  Rng rng(seed);
  rng.shuffle(labels);
  for (std::size_t i = 0; i < labels.size(); ++i) out.records[i].label = labels[i];
  return out;
}

// ------------------------------------------------------------------ split

DatasetSplit split_chronological(const Corpus& corpus, double val_fraction,
                                 double test_fraction) {
  const std::size_t n = corpus.records.size();
  if (n < 3) throw DataError("split: corpus needs at least 3 records, has " + std::to_string(n));
  if (!(val_fraction > 0.0) || !(test_fraction > 0.0) || !(val_fraction + test_fraction < 1.0)) {
    throw ConfigError("split: fractions must be positive with sum < 1");
  }
  auto block = [n](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * n)));
  };
  const std::size_t n_test = block(test_fraction);
  const std::size_t n_val = block(val_fraction);
  if (n_test + n_val >= n) {
    throw ConfigError("split: fractions leave no training records");
  }
  DatasetSplit s;
  s.test = {n - n_test, n};
  s.validation = {n - n_test - n_val, n - n_test};
  s.train = {0, n - n_test - n_val};
  return s;
}

// ---------------------------------------------------------------- history

History history_before(const Corpus& corpus, std::size_t record) {
  const auto& q = corpus.records.at(record);
  History h;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto& r = corpus.records[i];
    if (r.review_time >= q.review_time) continue;
    if (r.post == q.post) h.post_history.push_back(i);
    if (r.candidate == q.candidate) h.candidate_history.push_back(i);
  }
  auto by_time = [&](std::size_t a, std::size_t b) {
    return corpus.records[a].review_time < corpus.records[b].review_time;
  };
  std::sort(h.post_history.begin(), h.post_history.end(), by_time);
  std::sort(h.candidate_history.begin(), h.candidate_history.end(), by_time);
  return h;
}

HistoryIndex::HistoryIndex(const Corpus& corpus) : corpus_(&corpus) {
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    by_post_[corpus.records[i].post].push_back(i);
    by_candidate_[corpus.records[i].candidate].push_back(i);
  }
  auto by_time = [&](std::size_t a, std::size_t b) {
    return corpus.records[a].review_time < corpus.records[b].review_time;
  };
  for (auto& [_, v] : by_post_) std::sort(v.begin(), v.end(), by_time);
  for (auto& [_, v] : by_candidate_) std::sort(v.begin(), v.end(), by_time);
}

History HistoryIndex::before(std::size_t record) const {
  const auto& q = corpus_->records.at(record);
  auto earlier = [&](const std::vector<std::size_t>& v) {
    auto it = std::lower_bound(v.begin(), v.end(), q.review_time,
                               [&](std::size_t i, std::int64_t t) {
                                 return corpus_->records[i].review_time < t;
                               });
    return std::vector<std::size_t>(v.begin(), it);
  };
  return {earlier(by_post_.at(q.post)), earlier(by_candidate_.at(q.candidate))};
}

// --------------------------------------------------------------------- IO

namespace {

json doc_to_json(const Document& d) {
  return json{{"fields", d.fields}, {"sentences", d.sentences}};
}

Document doc_from_json(const json& j) {
  Document d;
  d.fields = j.at("fields").get<std::map<std::string, std::map<std::string, std::string>>>();
  d.sentences = j.at("sentences").get<std::vector<std::string>>();
  if (d.fields.empty()) throw DataError("document has no structured fields");
  return d;
}

json config_to_json(const GeneratorConfig& c) {
  return json{{"candidates", c.candidates},       {"posts", c.posts},
              {"applications", c.applications},   {"latent_dim", c.latent_dim},
              {"required_skills", c.required_skills}, {"drift", c.drift},
              {"relax_fraction", c.relax_fraction}, {"label_noise", c.label_noise},
              {"base_rate", c.base_rate},         {"skill_weight", c.skill_weight},
              {"quality_weight", c.quality_weight}, {"text_weight", c.text_weight},
              {"mutation_prob", c.mutation_prob}};
}

GeneratorConfig config_from_json(const json& j) {
  GeneratorConfig c;
  c.candidates = j.at("candidates");
  c.posts = j.at("posts");
  c.applications = j.at("applications");
  c.latent_dim = j.at("latent_dim");
  c.required_skills = j.at("required_skills");
  c.drift = j.at("drift");
  c.relax_fraction = j.at("relax_fraction");
  c.label_noise = j.at("label_noise");
  c.base_rate = j.at("base_rate");
  c.skill_weight = j.at("skill_weight");
  c.quality_weight = j.at("quality_weight");
  c.text_weight = j.at("text_weight");
  c.mutation_prob = j.at("mutation_prob");
  return c;
}

json truth_to_json(const PlantedTruth& t) {
  json cands = json::array();
  for (const auto& c : t.candidates) {
    cands.push_back({c.tier_level, c.degree_level, c.years, c.leadership ? 1 : 0});
  }
  json posts = json::array();
  for (const auto& p : t.posts) posts.push_back({{"required", p.required}, {"seniority", p.seniority}});
  return json{{"bar_offset", t.bar_offset},
              {"candidates", cands},
              {"posts", posts},
              {"record_skills", t.record_skills}};
}

PlantedTruth truth_from_json(const json& j) {
  PlantedTruth t;
  t.bar_offset = j.at("bar_offset");
  for (const auto& c : j.at("candidates")) {
    t.candidates.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>(),
                            c.at(3).get<int>() != 0});
  }
  for (const auto& p : j.at("posts")) {
    t.posts.push_back({p.at("required").get<std::vector<int>>(), p.at("seniority").get<int>()});
  }
  t.record_skills = j.at("record_skills").get<std::vector<std::uint32_t>>();
  return t;
}

template <typename F>
void for_each_line(const std::string& text, const std::filesystem::path& path, F&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

CorpusFiles corpus_files(const std::filesystem::path& records_path) {
  auto stem = records_path;
  if (stem.extension() == ".jsonl") stem.replace_extension();
  auto with = [&](const char* suffix) {
    auto p = stem;
    p += suffix;
    return p;
  };
  return {records_path, with(".posts.jsonl"), with(".manifest.json")};
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& records_path) {
  const auto files = corpus_files(records_path);
  std::string records;
  for (const auto& r : corpus.records) {
    json j{{"candidate", r.candidate.value}, {"post", r.post.value},
           {"label", r.label},               {"review_time", r.review_time},
           {"seq_index", r.seq_index},       {"resume", doc_to_json(r.resume)}};
    records += j.dump();
    records += '\n';
  }
  std::string posts;
  for (const auto& [id, doc] : corpus.posts) {
    posts += json{{"post", id.value}, {"doc", doc_to_json(doc)}}.dump();
    posts += '\n';
  }
  json manifest{{"format_version", kCorpusFormatVersion},
                {"seed", corpus.seed},
                {"config", config_to_json(corpus.config)},
                {"truth", truth_to_json(corpus.truth)},
                {"records", corpus.records.size()},
                {"posts", corpus.posts.size()}};
  write_file_atomic(files.posts, posts);
  write_file_atomic(files.manifest, manifest.dump() + "\n");
  write_file_atomic(files.records, records);
}

Corpus load_corpus(const std::filesystem::path& records_path) {
  const auto files = corpus_files(records_path);
  Corpus corpus;
  json manifest;
  try {
    manifest = json::parse(read_file(files.manifest));
    if (manifest.at("format_version").get<int>() != kCorpusFormatVersion) {
      throw DataError("unsupported corpus format version " +
                      manifest.at("format_version").dump());
    }
    corpus.seed = manifest.at("seed");
    corpus.config = config_from_json(manifest.at("config"));
    corpus.truth = truth_from_json(manifest.at("truth"));
  } catch (const json::exception& e) {
    throw DataError(files.manifest.string() + ": " + e.what());
  }
  for_each_line(read_file(files.posts), files.posts, [&](const json& j) {
    PostId id{j.at("post").get<std::uint32_t>()};
    if (!corpus.posts.emplace(id, doc_from_json(j.at("doc"))).second) {
      throw DataError("duplicate post id " + std::to_string(id.value));
    }
  });
  for_each_line(read_file(files.records), files.records, [&](const json& j) {
    ApplicationRecord r;
    r.candidate = CandidateId{j.at("candidate").get<std::uint32_t>()};
    r.post = PostId{j.at("post").get<std::uint32_t>()};
    r.label = j.at("label");
    r.review_time = j.at("review_time");
    r.seq_index = j.at("seq_index");
    r.resume = doc_from_json(j.at("resume"));
    if (r.label != 0 && r.label != 1) throw DataError("label must be 0 or 1");
    if (!corpus.posts.contains(r.post)) {
      throw DataError("record references unknown post " + std::to_string(r.post.value));
    }
    if (!corpus.records.empty() && r.review_time <= corpus.records.back().review_time) {
      throw DataError("review times must be strictly increasing");
    }
    corpus.records.push_back(std::move(r));
  });
  if (manifest.at("records").get<std::size_t>() != corpus.records.size()) {
    throw DataError("manifest record count does not match " + files.records.string());
  }
  return corpus;
}

}  // namespace pjfit

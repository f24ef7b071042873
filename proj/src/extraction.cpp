#include "pjfit/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pjfit/errors.hpp"
#include "pjfit/io.hpp"
#include "pjfit/tensor.hpp"

namespace pjfit {

using nlohmann::json;

// ------------------------------------------------------------------ schema

std::size_t EntityField::category_index(const std::string& value) const {
  auto last = vocabulary.end() - 1;  // OOV
  auto it = std::lower_bound(vocabulary.begin(), last, value);
  if (it != last && *it == value) return static_cast<std::size_t>(it - vocabulary.begin());
  return oov_index();
}

EntitySchema::EntitySchema(std::vector<EntityField> fields) : fields_(std::move(fields)) {
  for (const auto& f : fields_) {
    if (f.kind == FieldKind::Categorical) {
      if (f.vocabulary.empty() || f.vocabulary.back() != kOovToken) {
        throw DataError("schema field '" + f.name + "' vocabulary must end with the OOV token");
      }
      if (!std::is_sorted(f.vocabulary.begin(), f.vocabulary.end() - 1)) {
        throw DataError("schema field '" + f.name + "' vocabulary is not sorted");
      }
    } else if (!(f.stddev > 0.0) || !std::isfinite(f.mean)) {
      throw DataError("schema field '" + f.name + "' has invalid standardization stats");
    }
    offsets_.push_back(sparse_dim_);
    sparse_dim_ += f.width();
  }
}

std::optional<std::size_t> EntitySchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return i;
  }
  return std::nullopt;
}

// ------------------------------------------------------------------- words

WordVocabulary::WordVocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i + 2);
}

std::size_t WordVocabulary::index(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kOov : it->second;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> out;
  std::istringstream in(normalize_text(sentence));
  std::string tok;
  while (in >> tok) {
    while (!tok.empty() && std::string_view(",;:!?()").find(tok.back()) != std::string_view::npos) {
      tok.pop_back();
    }
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

// -------------------------------------------------------------- inventories

namespace {

FieldSpec cat(std::string name, FieldRule::Op op, std::string section, std::string key,
              std::string kind = "", std::string token = "", std::size_t slot = 0) {
  return {std::move(name), FieldKind::Categorical,
          FieldRule{op, std::move(section), std::move(key), std::move(kind), std::move(token), slot}};
}

FieldSpec real(std::string name, std::string section, std::string key) {
  return {std::move(name), FieldKind::Real,
          FieldRule{FieldRule::Op::Number, std::move(section), std::move(key), "", "", 0}};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = normalize_text(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string canonical_or_self(const ResourceTables& tables, const std::string& kind,
                              const std::string& text) {
  auto c = tables.canonical(kind, text);
  return c ? *c : normalize_text(text);
}

}  // namespace

std::vector<FieldSpec> resume_field_specs() {
  using Op = FieldRule::Op;
  std::vector<FieldSpec> specs = {
      cat("gender", Op::Text, "demographics", "gender"),
      cat("location", Op::Text, "demographics", "location"),
      real("age", "demographics", "age"),
      cat("university", Op::Alias, "education", "university", "university"),
      cat("university_tier", Op::Tier, "education", "university", "university"),
      cat("degree", Op::Alias, "education", "degree", "degree"),
      cat("major", Op::Text, "education", "major"),
      real("gpa", "education", "gpa"),
      real("years_experience", "experience", "years"),
      cat("last_position", Op::Text, "experience", "last_position"),
      real("num_companies", "experience", "companies"),
      cat("certification", Op::Text, "certification", "name"),
  };
  for (const auto& skill : skill_catalogue()) {
    specs.push_back(cat("skill_" + skill, Op::Contains, "skills", "list", "skill", skill));
  }
  return specs;
}

std::vector<FieldSpec> post_field_specs() {
  using Op = FieldRule::Op;
  std::vector<FieldSpec> specs = {
      cat("title", Op::Text, "position", "title"),
      cat("seniority", Op::Text, "position", "seniority"),
      cat("location", Op::Text, "position", "location"),
      cat("remote", Op::Text, "position", "remote"),
      cat("industry", Op::Text, "position", "industry"),
      cat("min_degree", Op::Alias, "requirements", "degree", "degree"),
      cat("req_skill_1", Op::ListSlot, "requirements", "skills", "skill", "", 0),
      cat("req_skill_2", Op::ListSlot, "requirements", "skills", "skill", "", 1),
      cat("req_skill_3", Op::ListSlot, "requirements", "skills", "skill", "", 2),
      real("min_years", "requirements", "years"),
      real("salary", "compensation", "salary"),
      real("team_size", "compensation", "team_size"),
  };
  for (const auto& skill : skill_catalogue())
    specs.push_back(cat("requires_" + skill, Op::Contains, "requirements", "skills", "skill", skill));
  return specs;
}

RawValue read_field(const Document& doc, const FieldRule& rule, const ResourceTables& tables) {
  using Op = FieldRule::Op;
  auto sec = doc.fields.find(rule.section);
  const std::string* text = nullptr;
  if (sec != doc.fields.end()) {
    auto k = sec->second.find(rule.key);
    if (k != sec->second.end()) text = &k->second;
  }
  RawValue out;
  switch (rule.op) {
    case Op::Number: {
      static const std::regex number(R"([-+]?[0-9]+(\.[0-9]+)?)");
      std::smatch m;
      if (text != nullptr && std::regex_search(*text, m, number)) out.number = std::stod(m.str());
      return out;
    }
    case Op::Text:
      out.text = text ? normalize_text(*text) : kMissingToken;
      return out;
    case Op::Alias:
      out.text = text ? canonical_or_self(tables, rule.kind, *text) : kMissingToken;
      return out;
    case Op::Tier: {
      if (text == nullptr) {
        out.text = kMissingToken;
        return out;
      }
      auto uni = tables.canonical(rule.kind, *text);
      out.text = university_tier(uni ? tables.university_rank(*uni) : std::nullopt);
      return out;
    }
    case Op::Contains: {
      out.text = "no";
      if (text == nullptr) return out;
      for (const auto& item : split_list(*text)) {
        if (canonical_or_self(tables, rule.kind, item) == rule.token) out.text = "yes";
      }
      return out;
    }
    case Op::ListSlot: {
      std::vector<std::string> items;
      if (text != nullptr) {
        for (const auto& item : split_list(*text)) {
          items.push_back(canonical_or_self(tables, rule.kind, item));
        }
      }
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
      out.text = rule.slot < items.size() ? items[rule.slot] : "none";
      return out;
    }
  }
  return out;
}

// --------------------------------------------------------------------- fit

EntitySchema fit_entity_schema(const std::vector<FieldSpec>& specs,
                               const std::vector<const Document*>& train_docs,
                               const ResourceTables& tables) {
  if (train_docs.empty()) throw DataError("fit_schema: no training documents");
  std::vector<EntityField> fields;
  for (const auto& spec : specs) {
    EntityField f{spec.name, spec.kind, spec.rule, {}, 0.0, 1.0};
    if (spec.kind == FieldKind::Categorical) {
      std::set<std::string> values;
      for (const Document* d : train_docs) values.insert(read_field(*d, spec.rule, tables).text);
      f.vocabulary.assign(values.begin(), values.end());
      f.vocabulary.push_back(kOovToken);
    } else {
      double sum = 0.0, sumsq = 0.0;
      std::size_t n = 0;
      for (const Document* d : train_docs) {
        if (auto v = read_field(*d, spec.rule, tables).number) {
          sum += *v;
          ++n;
        }
      }
      if (n == 0) throw SchemaFitError("fit_schema: real field '" + spec.name + "' never present");
      f.mean = sum / static_cast<double>(n);
      for (const Document* d : train_docs) {
        if (auto v = read_field(*d, spec.rule, tables).number) sumsq += (*v - f.mean) * (*v - f.mean);
      }
      f.stddev = std::sqrt(sumsq / static_cast<double>(n));
      if (!(f.stddev > 0.0)) {
        throw SchemaFitError("fit_schema: real field '" + spec.name +
                             "' is constant on the training split");
      }
    }
    fields.push_back(std::move(f));
  }
  return EntitySchema(std::move(fields));
}

WordVocabulary fit_word_vocabulary(const std::vector<const Document*>& train_docs) {
  std::set<std::string> words;
  for (const Document* d : train_docs) {
    for (const auto& s : d->sentences) {
      for (auto& w : tokenize(s)) words.insert(std::move(w));
    }
  }
  return WordVocabulary(std::vector<std::string>(words.begin(), words.end()));
}

FittedSchemas fit_schema(const Corpus& corpus, const DatasetSplit& split,
                         const ResourceTables& tables) {
  if (split.train.size() == 0) throw DataError("fit_schema: empty training split");
  std::vector<const Document*> resumes;
  std::set<PostId> post_ids;
  for (std::size_t i = split.train.begin; i < split.train.end; ++i) {
    resumes.push_back(&corpus.records.at(i).resume);
    post_ids.insert(corpus.records[i].post);
  }
  std::vector<const Document*> posts;
  for (PostId id : post_ids) posts.push_back(&corpus.post(id));
  FittedSchemas out;
  out.resume = {fit_entity_schema(resume_field_specs(), resumes, tables),
                fit_word_vocabulary(resumes)};
  out.post = {fit_entity_schema(post_field_specs(), posts, tables), fit_word_vocabulary(posts)};
  return out;
}

// ---------------------------------------------------------------- encoding

EntityVector extract_entities(const Document& doc, const EntitySchema& schema,
                              const ResourceTables& tables) {
  EntityVector out;
  out.values.reserve(schema.size());
  for (const auto& f : schema.fields()) {
    const RawValue raw = read_field(doc, f.rule, tables);
    EntityValue v;
    if (f.kind == FieldKind::Categorical) {
      v.category = f.category_index(raw.text);
    } else {
      v.real = raw.number.value_or(f.mean);
    }
    out.values.push_back(v);
  }
  return out;
}

SparseFeature encode_sparse(const EntityVector& entities, const EntitySchema& schema) {
  require_size(entities.values.size(), schema.size(), "encode_sparse");
  SparseFeature x;
  x.dim = schema.sparse_dim();
  x.indices.reserve(schema.size());
  x.values.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.fields()[i];
    const auto& v = entities.values[i];
    if (f.kind == FieldKind::Categorical) {
      if (v.category >= f.vocabulary.size()) {
        throw ShapeError("encode_sparse: category " + std::to_string(v.category) +
                         " out of range for field '" + f.name + "' (vocabulary " +
                         std::to_string(f.vocabulary.size()) + ")");
      }
      x.indices.push_back(schema.offset(i) + v.category);
      x.values.push_back(1.0);
    } else {
      x.indices.push_back(schema.offset(i));
      x.values.push_back((v.real - f.mean) / f.stddev);
    }
  }
  return x;
}

EntityVector decode_sparse(const SparseFeature& x, const EntitySchema& schema) {
  require_size(x.active(), schema.size(), "decode_sparse");
  EntityVector out;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.fields()[i];
    EntityValue v;
    if (f.kind == FieldKind::Categorical) {
      v.category = x.indices[i] - schema.offset(i);
    } else {
      v.real = x.values[i] * f.stddev + f.mean;
    }
    out.values.push_back(v);
  }
  return out;
}

TextMatrix encode_text(const Document& doc, const WordVocabulary& vocab,
                       std::size_t max_sentences, std::size_t max_words) {
  TextMatrix m{max_sentences, max_words,
               std::vector<std::size_t>(max_sentences * max_words, WordVocabulary::kPad)};
  for (std::size_t s = 0; s < std::min(max_sentences, doc.sentences.size()); ++s) {
    const auto words = tokenize(doc.sentences[s]);
    for (std::size_t w = 0; w < std::min(max_words, words.size()); ++w) {
      m.ids[s * max_words + w] = vocab.index(words[w]);
    }
  }
  return m;
}

EncodedDocument encode_document(const Document& doc, const DocumentSchema& schema,
                                std::size_t max_sentences, std::size_t max_words,
                                const ResourceTables& tables) {
  return {encode_sparse(extract_entities(doc, schema.entities, tables), schema.entities),
          encode_text(doc, schema.words, max_sentences, max_words)};
}

EntitySchema synthetic_schema(const std::string& prefix, std::size_t fields,
                              std::size_t sparse_dim, std::size_t real_fields) {
  if (real_fields > fields || sparse_dim < real_fields + 2 * (fields - real_fields)) {
    throw ConfigError("synthetic_schema: d_x too small for the requested fields");
  }
  const std::size_t categorical = fields - real_fields;
  const std::size_t cat_dim = sparse_dim - real_fields;
  std::vector<EntityField> out;
  for (std::size_t i = 0; i < fields; ++i) {
    EntityField f;
    f.name = prefix + "_" + std::to_string(i);
    if (i < categorical) {
      // Spread the categorical width evenly; earlier fields take the remainder.
      const std::size_t width = cat_dim / categorical + (i < cat_dim % categorical ? 1 : 0);
      for (std::size_t k = 0; k + 1 < width; ++k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "v%06zu", k);
        f.vocabulary.emplace_back(buf);
      }
      f.vocabulary.emplace_back(kOovToken);
    } else {
      f.kind = FieldKind::Real;
    }
    out.push_back(std::move(f));
  }
  return EntitySchema(std::move(out));
}

std::vector<std::pair<std::string, std::string>> describe_entities(const EntityVector& entities,
                                                                   const EntitySchema& schema) {
  require_size(entities.values.size(), schema.size(), "describe_entities");
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.fields()[i];
    if (f.kind == FieldKind::Categorical) {
      out.emplace_back(f.name, f.vocabulary.at(entities.values[i].category));
    } else {
      std::ostringstream s;
      s << entities.values[i].real;
      out.emplace_back(f.name, s.str());
    }
  }
  return out;
}

// -------------------------------------------------------------------- json

namespace {

const char* op_name(FieldRule::Op op) {
  switch (op) {
    case FieldRule::Op::Text: return "text";
    case FieldRule::Op::Alias: return "alias";
    case FieldRule::Op::Contains: return "contains";
    case FieldRule::Op::ListSlot: return "list_slot";
    case FieldRule::Op::Number: return "number";
    case FieldRule::Op::Tier: return "tier";
  }
  return "text";
}

FieldRule::Op op_from(const std::string& s) {
  for (auto op : {FieldRule::Op::Text, FieldRule::Op::Alias, FieldRule::Op::Contains,
                  FieldRule::Op::ListSlot, FieldRule::Op::Number, FieldRule::Op::Tier}) {
    if (s == op_name(op)) return op;
  }
  throw DataError("schema: unknown rule '" + s + "'");
}

json entity_schema_to_json(const EntitySchema& schema) {
  json fields = json::array();
  for (const auto& f : schema.fields()) {
    json j{{"name", f.name},
           {"kind", f.kind == FieldKind::Real ? "real" : "categorical"},
           {"rule",
            {{"op", op_name(f.rule.op)},
             {"section", f.rule.section},
             {"key", f.rule.key},
             {"kind", f.rule.kind},
             {"token", f.rule.token},
             {"slot", f.rule.slot}}}};
    if (f.kind == FieldKind::Real) {
      j["mean"] = f.mean;
      j["stddev"] = f.stddev;
    } else {
      j["vocabulary"] = f.vocabulary;
    }
    fields.push_back(std::move(j));
  }
  return fields;
}

EntitySchema entity_schema_from_json(const json& j) {
  std::vector<EntityField> fields;
  for (const auto& jf : j) {
    EntityField f;
    f.name = jf.at("name");
    const std::string kind = jf.at("kind");
    if (kind != "real" && kind != "categorical") throw DataError("schema: bad kind " + kind);
    f.kind = kind == "real" ? FieldKind::Real : FieldKind::Categorical;
    const auto& r = jf.at("rule");
    f.rule = {op_from(r.at("op")), r.at("section"), r.at("key"),
              r.at("kind"),        r.at("token"),   r.at("slot")};
    if (f.kind == FieldKind::Real) {
      f.mean = jf.at("mean");
      f.stddev = jf.at("stddev");
    } else {
      f.vocabulary = jf.at("vocabulary").get<std::vector<std::string>>();
    }
    fields.push_back(std::move(f));
  }
  return EntitySchema(std::move(fields));
}

}  // namespace

json schemas_to_json(const FittedSchemas& s) {
  auto side = [](const DocumentSchema& d) {
    return json{{"fields", entity_schema_to_json(d.entities)}, {"words", d.words.words()}};
  };
  return json{{"format_version", kSchemaFormatVersion},
              {"resume", side(s.resume)},
              {"post", side(s.post)}};
}

FittedSchemas schemas_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kSchemaFormatVersion) {
      throw DataError("unsupported schema format version " + j.at("format_version").dump());
    }
    auto side = [](const json& d) {
      return DocumentSchema{entity_schema_from_json(d.at("fields")),
                            WordVocabulary(d.at("words").get<std::vector<std::string>>())};
    };
    return {side(j.at("resume")), side(j.at("post"))};
  } catch (const json::exception& e) {
    throw DataError(std::string("schema: ") + e.what());
  }
}

void save_schemas(const FittedSchemas& schemas, const std::filesystem::path& path) {
  write_file_atomic(path, schemas_to_json(schemas).dump(1) + "\n");
}

FittedSchemas load_schemas(const std::filesystem::path& path) {
  try {
    return schemas_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace pjfit

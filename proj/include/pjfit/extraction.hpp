#pragma once

// Semantic entity extraction: rules and dictionary lookups turn a document
// into a fixed list of typed entities, which are expanded into a sparse
// one-hot / standardized vector.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pjfit/corpus.hpp"
#include "pjfit/features.hpp"
#include "pjfit/resources.hpp"

namespace pjfit {

enum class FieldKind { Categorical, Real };

// Where and how an entity's raw value is read from a document.
struct FieldRule {
  enum class Op {
    Text,      // normalized text of section/key
    Alias,     // text mapped through the alias dictionary `kind`
    Contains,  // "yes"/"no": comma list at section/key contains `token`
    ListSlot,  // slot-th entry of the sorted canonical comma list
    Number,    // first number in the text
    Tier,      // ranking tier of the university named at section/key
  };
  Op op = Op::Text;
  std::string section;
  std::string key;
  std::string kind;   // alias dictionary for Alias/Contains/ListSlot
  std::string token;  // Contains
  std::size_t slot = 0;

  friend bool operator==(const FieldRule&, const FieldRule&) = default;
};

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::Categorical;
  FieldRule rule;
};

inline constexpr const char* kOovToken = "<oov>";
inline constexpr const char* kMissingToken = "<missing>";

struct EntityField {
  std::string name;
  FieldKind kind = FieldKind::Categorical;
  FieldRule rule;
  // Categorical only: sorted training values followed by the OOV token.
  // Lookups binary-search the sorted prefix.
  std::vector<std::string> vocabulary;
  // Real only, from the training split (population formula).
  double mean = 0.0;
  double stddev = 1.0;

  std::size_t oov_index() const { return vocabulary.size() - 1; }
  // Width in the sparse vector: vocabulary size, or 1 for reals.
  std::size_t width() const { return kind == FieldKind::Real ? 1 : vocabulary.size(); }
  std::size_t category_index(const std::string& value) const;

  friend bool operator==(const EntityField& a, const EntityField& b) {
    return a.name == b.name && a.kind == b.kind && a.rule == b.rule &&
           a.vocabulary == b.vocabulary && a.mean == b.mean && a.stddev == b.stddev;
  }
};

class EntitySchema {
 public:
  EntitySchema() = default;
  explicit EntitySchema(std::vector<EntityField> fields);

  const std::vector<EntityField>& fields() const { return fields_; }
  std::size_t size() const { return fields_.size(); }  // s
  std::size_t sparse_dim() const { return sparse_dim_; }  // d_x
  std::size_t offset(std::size_t field) const { return offsets_[field]; }
  std::optional<std::size_t> find(const std::string& name) const;

  friend bool operator==(const EntitySchema& a, const EntitySchema& b) {
    return a.fields_ == b.fields_;
  }

 private:
  std::vector<EntityField> fields_;
  std::vector<std::size_t> offsets_;
  std::size_t sparse_dim_ = 0;
};

struct EntityValue {
  std::size_t category = 0;  // categorical fields
  double real = 0.0;         // real fields, unstandardized
  friend bool operator==(const EntityValue&, const EntityValue&) = default;
};

struct EntityVector {
  std::vector<EntityValue> values;  // one per schema field
  friend bool operator==(const EntityVector&, const EntityVector&) = default;
};

// Word index 0 is padding, 1 is out-of-vocabulary.
class WordVocabulary {
 public:
  WordVocabulary() = default;
  explicit WordVocabulary(std::vector<std::string> words);  // excluding pad/oov

  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kOov = 1;

  std::size_t size() const { return words_.size() + 2; }
  std::size_t index(const std::string& word) const;
  const std::vector<std::string>& words() const { return words_; }
  friend bool operator==(const WordVocabulary& a, const WordVocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

std::vector<std::string> tokenize(const std::string& sentence);

struct DocumentSchema {
  EntitySchema entities;
  WordVocabulary words;
  friend bool operator==(const DocumentSchema&, const DocumentSchema&) = default;
};

struct FittedSchemas {
  DocumentSchema resume;
  DocumentSchema post;
  friend bool operator==(const FittedSchemas&, const FittedSchemas&) = default;
};

// Field inventories for generated resumes and posts (24 fields each).
std::vector<FieldSpec> resume_field_specs();
std::vector<FieldSpec> post_field_specs();

// Raw value of one field: categorical text (kMissingToken when absent) or a
// real number (nullopt when absent).
struct RawValue {
  std::string text;
  std::optional<double> number;
};
RawValue read_field(const Document& doc, const FieldRule& rule, const ResourceTables& tables);

// Vocabularies and standardization statistics from `train_docs` only.
// Throws SchemaFitError naming a real field that is constant or never present.
EntitySchema fit_entity_schema(const std::vector<FieldSpec>& specs,
                               const std::vector<const Document*>& train_docs,
                               const ResourceTables& tables = ResourceTables::builtin());
WordVocabulary fit_word_vocabulary(const std::vector<const Document*>& train_docs);

// Resume schema from train resumes; post schema from the distinct posts of
// train records. Throws DataError when the train split is empty.
FittedSchemas fit_schema(const Corpus& corpus, const DatasetSplit& split,
                         const ResourceTables& tables = ResourceTables::builtin());

// Total: unknown categories map to OOV, missing reals to the train mean.
EntityVector extract_entities(const Document& doc, const EntitySchema& schema,
                              const ResourceTables& tables = ResourceTables::builtin());

// Throws ShapeError if the vector does not conform to the schema.
SparseFeature encode_sparse(const EntityVector& entities, const EntitySchema& schema);
// Inverse of encode_sparse (reals are de-standardized).
EntityVector decode_sparse(const SparseFeature& x, const EntitySchema& schema);

// Truncates/pads at both the sentence and the word level.
TextMatrix encode_text(const Document& doc, const WordVocabulary& vocab, std::size_t max_sentences,
                       std::size_t max_words);

EncodedDocument encode_document(const Document& doc, const DocumentSchema& schema,
                                std::size_t max_sentences, std::size_t max_words,
                                const ResourceTables& tables = ResourceTables::builtin());

// Schema with a prescribed shape (field count, d_x, number of real fields)
// for shape checks at sizes no generated corpus reaches.
EntitySchema synthetic_schema(const std::string& prefix, std::size_t fields, std::size_t sparse_dim,
                              std::size_t real_fields);

// Side-by-side entity listing: field name and decoded value.
std::vector<std::pair<std::string, std::string>> describe_entities(const EntityVector& entities,
                                                                   const EntitySchema& schema);

nlohmann::json schemas_to_json(const FittedSchemas& schemas);
FittedSchemas schemas_from_json(const nlohmann::json& j);
void save_schemas(const FittedSchemas& schemas, const std::filesystem::path& path);
FittedSchemas load_schemas(const std::filesystem::path& path);

inline constexpr int kSchemaFormatVersion = 1;

}  // namespace pjfit

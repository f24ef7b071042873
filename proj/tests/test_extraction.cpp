#include <cmath>

#include "doctest.h"
#include "pjfit/errors.hpp"
#include "pjfit/extraction.hpp"
#include "pjfit/rng.hpp"

using namespace pjfit;

namespace {

Document doc(std::map<std::string, std::map<std::string, std::string>> fields,
             std::vector<std::string> sentences = {}) {
  return Document{std::move(fields), std::move(sentences)};
}

GeneratorConfig small_config(std::size_t applications = 1000) {
  GeneratorConfig cfg;
  cfg.candidates = applications / 3;
  cfg.posts = 60;
  cfg.applications = applications;
  return cfg;
}

}  // namespace

TEST_CASE("categorical vocabulary is the sorted training values plus OOV") {
  const Document a = doc({{"skills", {{"primary", "ml"}}}});
  const Document b = doc({{"skills", {{"primary", "db"}}}});
  const Document c = doc({{"skills", {{"primary", "ml"}}}});
  const std::vector<FieldSpec> specs = {
      {"skill", FieldKind::Categorical, {FieldRule::Op::Text, "skills", "primary"}}};
  const auto schema = fit_entity_schema(specs, {&a, &b, &c});
  REQUIRE(schema.size() == 1);
  CHECK(schema.fields()[0].vocabulary == std::vector<std::string>{"db", "ml", kOovToken});
  CHECK(schema.sparse_dim() == 3);
}

TEST_CASE("real field stats use the population formula") {
  const Document a = doc({{"experience", {{"years", "2 years"}}}});
  const Document b = doc({{"experience", {{"years", "4 years"}}}});
  const std::vector<FieldSpec> specs = {
      {"years_experience", FieldKind::Real, {FieldRule::Op::Number, "experience", "years"}}};
  const auto schema = fit_entity_schema(specs, {&a, &b});
  CHECK(schema.fields()[0].mean == 3.0);
  CHECK(schema.fields()[0].stddev == 1.0);
}

TEST_CASE("a constant real field fails the fit and names the field") {
  const Document a = doc({{"experience", {{"years", "4"}}}});
  const std::vector<FieldSpec> specs = {
      {"years_experience", FieldKind::Real, {FieldRule::Op::Number, "experience", "years"}}};
  try {
    fit_entity_schema(specs, {&a, &a});
    FAIL("expected SchemaFitError");
  } catch (const SchemaFitError& e) {
    CHECK(std::string(e.what()).find("years_experience") != std::string::npos);
  }
}

TEST_CASE("university tier is derived through the bundled ranking table") {
  const auto& tables = ResourceTables::builtin();
  REQUIRE(tables.university_rank("U7") == 30);
  CHECK(university_tier(tables.university_rank("U7")) == "top50");
  const FieldRule tier{FieldRule::Op::Tier, "education", "university", "university"};
  CHECK(read_field(doc({{"education", {{"university", "Univ. 7"}}}}), tier, tables).text ==
        "top50");
  CHECK(read_field(doc({{"education", {{"university", "nowhere college"}}}}), tier, tables).text ==
        "unranked");
  CHECK(university_tier(101) == "top200");
  CHECK(university_tier(std::nullopt) == "unranked");
}

TEST_CASE("unknown categories map to OOV and missing reals to the mean") {
  const Document train1 = doc({{"demographics", {{"age", "25"}}}, {"education", {{"university", "U1"}}}});
  const Document train2 = doc({{"demographics", {{"age", "35"}}}, {"education", {{"university", "U2"}}}});
  const std::vector<FieldSpec> specs = {
      {"age", FieldKind::Real, {FieldRule::Op::Number, "demographics", "age"}},
      {"university", FieldKind::Categorical,
       {FieldRule::Op::Alias, "education", "university", "university"}}};
  const auto schema = fit_entity_schema(specs, {&train1, &train2});

  const auto e = extract_entities(doc({{"demographics", {{"age", "27"}}},
                                       {"education", {{"university", "Mystery Institute"}}}}),
                                  schema);
  CHECK(e.values[0].real == 27.0);
  CHECK(e.values[1].category == schema.fields()[1].oov_index());

  const auto missing = extract_entities(doc({{"education", {{"university", "university 2"}}}}), schema);
  CHECK(missing.values[0].real == 30.0);
  CHECK(encode_sparse(missing, schema).values[0] == 0.0);
  CHECK(schema.fields()[1].vocabulary[missing.values[1].category] == "U2");
}

TEST_CASE("post skill list fills the skill-slot fields") {
  const auto& tables = ResourceTables::builtin();
  const Document post = doc({{"requirements", {{"skills", "python, ML"}}}});
  const FieldRule slot0{FieldRule::Op::ListSlot, "requirements", "skills", "skill", "", 0};
  const FieldRule slot1{FieldRule::Op::ListSlot, "requirements", "skills", "skill", "", 1};
  const FieldRule slot2{FieldRule::Op::ListSlot, "requirements", "skills", "skill", "", 2};
  CHECK(read_field(post, slot0, tables).text == "ml");
  CHECK(read_field(post, slot1, tables).text == "python");
  CHECK(read_field(post, slot2, tables).text == "none");
  const FieldRule has_ml{FieldRule::Op::Contains, "requirements", "skills", "skill", "ml"};
  CHECK(read_field(doc({{"requirements", {{"skills", "machine learning, sql"}}}}), has_ml, tables)
            .text == "yes");
}

TEST_CASE("encode_sparse: one-hot plus standardized slot") {
  EntityField cat3{"c", FieldKind::Categorical, {}, {"a", "b", kOovToken}, 0, 1};
  EntityField r{"r", FieldKind::Real, {}, {}, 5.0, 2.0};
  const EntitySchema schema({cat3, r});
  CHECK(schema.sparse_dim() == 4);

  auto x = encode_sparse(EntityVector{{{1, 0.0}, {0, 5.0}}}, schema);
  CHECK(x.indices == std::vector<std::size_t>{1, 3});
  CHECK(x.values == std::vector<double>{1.0, 0.0});

  x = encode_sparse(EntityVector{{{0, 0.0}, {0, 7.0}}}, schema);
  CHECK(x.indices == std::vector<std::size_t>{0, 3});
  CHECK(x.values == std::vector<double>{1.0, 1.0});

  CHECK_THROWS_AS(encode_sparse(EntityVector{{{3, 0.0}, {0, 5.0}}}, schema), ShapeError);
  CHECK_THROWS_AS(encode_sparse(EntityVector{{{0, 0.0}}}, schema), ShapeError);
}

TEST_CASE("decode inverts encode on random all-categorical schemas") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EntityField> fields;
    const std::size_t s = 1 + rng.index(8);
    for (std::size_t i = 0; i < s; ++i) {
      EntityField f{"f" + std::to_string(i), FieldKind::Categorical, {}, {}, 0, 1};
      const std::size_t n = 1 + rng.index(6);
      for (std::size_t k = 0; k < n; ++k) f.vocabulary.push_back("v" + std::to_string(k));
      f.vocabulary.push_back(kOovToken);
      fields.push_back(std::move(f));
    }
    const EntitySchema schema(fields);
    EntityVector e;
    for (const auto& f : schema.fields()) e.values.push_back({rng.index(f.vocabulary.size()), 0.0});
    const auto x = encode_sparse(e, schema);
    CHECK(x.active() == s);
    for (std::size_t k = 1; k < x.active(); ++k) CHECK(x.indices[k - 1] < x.indices[k]);
    CHECK(x.indices.back() < x.dim);
    CHECK(decode_sparse(x, schema) == e);
  }
}

TEST_CASE("generated resumes: extracted skills equal the planted skills") {
  const Corpus corpus = generate_synthetic(small_config(), 13);
  const auto split = split_chronological(corpus, 0.15, 0.15);
  const auto schemas = fit_schema(corpus, split);
  const auto& schema = schemas.resume.entities;
  REQUIRE(schema.size() == 24);
  CHECK(schemas.post.entities.size() == 24);
  const auto& skills = skill_catalogue();
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const auto e = extract_entities(corpus.records[i].resume, schema);
    std::uint32_t extracted = 0;
    for (std::size_t k = 0; k < skills.size(); ++k) {
      const auto idx = *schema.find("skill_" + skills[k]);
      if (schema.fields()[idx].vocabulary[e.values[idx].category] == "yes") extracted |= 1u << k;
    }
    CHECK(extracted == corpus.truth.record_skills[i]);
  }
}

TEST_CASE("every document encodes to exactly s active slots below d_x") {
  const Corpus corpus = generate_synthetic(small_config(600), 5);
  const auto split = split_chronological(corpus, 0.2, 0.2);
  const auto schemas = fit_schema(corpus, split);
  for (const auto& r : corpus.records) {
    const auto x = encode_sparse(extract_entities(r.resume, schemas.resume.entities),
                                 schemas.resume.entities);
    CHECK(x.active() == schemas.resume.entities.size());
    CHECK(x.indices.back() < x.dim);
  }
  for (const auto& [id, post] : corpus.posts) {
    const auto x = encode_sparse(extract_entities(post, schemas.post.entities),
                                 schemas.post.entities);
    CHECK(x.active() == schemas.post.entities.size());
  }
}

TEST_CASE("standardized reals have zero mean and unit variance on train") {
  const Corpus corpus = generate_synthetic(small_config(), 17);
  const auto split = split_chronological(corpus, 0.15, 0.15);
  const auto schema = fit_schema(corpus, split).resume.entities;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema.fields()[f].kind != FieldKind::Real) continue;
    // Only documents that report the field contribute to the statistics.
    double sum = 0, sumsq = 0;
    std::size_t n = 0;
    for (std::size_t i = split.train.begin; i < split.train.end; ++i) {
      const auto& doc = corpus.records[i].resume;
      if (!read_field(doc, schema.fields()[f].rule, ResourceTables::builtin()).number) continue;
      const double z = encode_sparse(extract_entities(doc, schema), schema).values[f];
      sum += z;
      sumsq += z * z;
      ++n;
    }
    CHECK(std::abs(sum / n) < 1e-9);
    CHECK(std::abs(sumsq / n - 1.0) < 1e-9);
  }
}

TEST_CASE("schema fitting ignores validation and test records") {
  const Corpus corpus = generate_synthetic(small_config(), 19);
  const auto split = split_chronological(corpus, 0.2, 0.2);
  Corpus train_only = corpus;
  train_only.records.resize(split.train.end);
  DatasetSplit train_split = split;
  train_split.validation = train_split.test = {split.train.end, split.train.end};
  CHECK(fit_schema(train_only, train_split) == fit_schema(corpus, split));
}

TEST_CASE("text matrix pads and truncates at both levels") {
  const WordVocabulary vocab({"a", "b", "c"});
  CHECK(vocab.index("a") == 2);
  CHECK(vocab.index("zzz") == WordVocabulary::kOov);
  const Document d = doc({{"x", {{"y", "z"}}}}, {"a b c a b", "c", "b", "a"});
  const auto m = encode_text(d, vocab, 3, 4);
  CHECK(m.ids == std::vector<std::size_t>{2, 3, 4, 2, 4, 0, 0, 0, 3, 0, 0, 0});
  const auto empty = encode_text(doc({{"x", {{"y", "z"}}}}), vocab, 2, 2);
  CHECK(empty.ids == std::vector<std::size_t>(4, 0));
}

TEST_CASE("schema file round trip") {
  const Corpus corpus = generate_synthetic(small_config(300), 23);
  const auto schemas = fit_schema(corpus, split_chronological(corpus, 0.2, 0.2));
  const auto path = std::filesystem::temp_directory_path() / "pjfit_schema_roundtrip.json";
  save_schemas(schemas, path);
  CHECK(load_schemas(path) == schemas);
}

TEST_CASE("synthetic schema reaches the requested shape") {
  const auto s = synthetic_schema("resume", 264, 37000, 24);
  CHECK(s.size() == 264);
  CHECK(s.sparse_dim() == 37000);
  const auto p = synthetic_schema("post", 57, 1600, 6);
  CHECK(p.size() == 57);
  CHECK(p.sparse_dim() == 1600);
}

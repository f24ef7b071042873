#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pjfit {

// Lookup tables shipped with the project: a university ranking list and
// alias dictionaries mapping surface mentions to canonical entity values.
class ResourceTables {
 public:
  // Tables compiled in from resources/*.tsv.
  static const ResourceTables& builtin();
  static ResourceTables from_tsv(std::string_view ranking_tsv, std::string_view aliases_tsv);
  static ResourceTables load(const std::filesystem::path& dir);

  std::optional<int> university_rank(const std::string& canonical) const;

  // Canonical value for a normalized surface form of `kind`, or nullopt.
  std::optional<std::string> canonical(const std::string& kind, const std::string& surface) const;
  // Every surface form for a canonical value, in file order.
  std::vector<std::string> surfaces(const std::string& kind, const std::string& canonical) const;

 private:
  std::map<std::string, int> ranks_;
  std::map<std::string, std::map<std::string, std::string>> alias_to_canonical_;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> canonical_to_aliases_;
};

// Tier label for a rank: top50, top100, top200, or unranked.
std::string university_tier(std::optional<int> rank);
int university_tier_level(std::optional<int> rank);  // unranked 0 .. top50 3

// Lower-case, trim and collapse internal whitespace.
std::string normalize_text(std::string_view text);

}  // namespace pjfit

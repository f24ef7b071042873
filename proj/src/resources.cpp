#include "pjfit/resources.hpp"

#include <cctype>
#include <sstream>

#include "pjfit/errors.hpp"
#include "pjfit/io.hpp"
#include "resource_data.hpp"

namespace pjfit {
namespace {

std::vector<std::vector<std::string>> parse_tsv(std::string_view text, std::size_t columns,
                                                const char* what) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, '\t')) cells.push_back(cell);
    if (cells.size() != columns) {
      throw DataError(std::string(what) + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " columns, expected " +
                      std::to_string(columns));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

const ResourceTables& ResourceTables::builtin() {
  static const ResourceTables tables =
      from_tsv(resource_data::kUniversityRanking, resource_data::kAliases);
  return tables;
}

ResourceTables ResourceTables::from_tsv(std::string_view ranking_tsv,
                                        std::string_view aliases_tsv) {
  ResourceTables t;
  for (auto& row : parse_tsv(ranking_tsv, 2, "university ranking")) {
    try {
      t.ranks_[row[0]] = std::stoi(row[1]);
    } catch (const std::exception&) {
      throw DataError("university ranking: bad rank '" + row[1] + "'");
    }
  }
  for (auto& row : parse_tsv(aliases_tsv, 3, "alias table")) {
    const std::string surface = normalize_text(row[1]);
    t.alias_to_canonical_[row[0]][surface] = row[2];
    t.canonical_to_aliases_[row[0]][row[2]].push_back(row[1]);
  }
  return t;
}

ResourceTables ResourceTables::load(const std::filesystem::path& dir) {
  return from_tsv(read_file(dir / "university_ranking.tsv"), read_file(dir / "aliases.tsv"));
}

std::optional<int> ResourceTables::university_rank(const std::string& canonical) const {
  auto it = ranks_.find(canonical);
  if (it == ranks_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> ResourceTables::canonical(const std::string& kind,
                                                     const std::string& surface) const {
  auto k = alias_to_canonical_.find(kind);
  if (k == alias_to_canonical_.end()) return std::nullopt;
  auto it = k->second.find(normalize_text(surface));
  if (it == k->second.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> ResourceTables::surfaces(const std::string& kind,
                                                  const std::string& canonical) const {
  auto k = canonical_to_aliases_.find(kind);
  if (k == canonical_to_aliases_.end()) return {};
  auto it = k->second.find(canonical);
  if (it == k->second.end()) return {};
  return it->second;
}

std::string university_tier(std::optional<int> rank) {
  switch (university_tier_level(rank)) {
    case 3: return "top50";
    case 2: return "top100";
    case 1: return "top200";
    default: return "unranked";
  }
}

int university_tier_level(std::optional<int> rank) {
  if (!rank) return 0;
  if (*rank <= 50) return 3;
  if (*rank <= 100) return 2;
  if (*rank <= 200) return 1;
  return 0;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

}  // namespace pjfit

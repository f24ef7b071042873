#pragma once

#include <cstddef>
#include <vector>

namespace pjfit {

// One-hot / standardized expansion of an entity vector. Exactly one active
// slot per schema field, in schema order, so `indices` is strictly
// increasing. A standardized real equal to 0.0 is still an active slot.
struct SparseFeature {
  std::size_t dim = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;

  std::size_t active() const { return indices.size(); }
  friend bool operator==(const SparseFeature&, const SparseFeature&) = default;
};

// Word indices, sentences x words, row-major. Index 0 is padding.
struct TextMatrix {
  std::size_t sentences = 0;
  std::size_t words = 0;
  std::vector<std::size_t> ids;

  std::size_t at(std::size_t s, std::size_t w) const { return ids[s * words + w]; }
  friend bool operator==(const TextMatrix&, const TextMatrix&) = default;
};

// Everything a tower consumes for one document.
struct EncodedDocument {
  SparseFeature features;
  TextMatrix text;
  friend bool operator==(const EncodedDocument&, const EncodedDocument&) = default;
};

}  // namespace pjfit

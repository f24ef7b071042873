#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "pjfit/nn.hpp"

namespace pjfit {

inline constexpr int kCheckpointFormatVersion = 1;

// Named parameter arrays plus the config that built them.
struct Checkpoint {
  nlohmann::json config;
  std::string config_hash;
  std::map<std::string, Tensor> tensors;

  bool has_section(const std::string& prefix) const;
};

// FNV-1a over the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

Checkpoint make_checkpoint(const nlohmann::json& config, std::span<nn::Parameter* const> params);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// Throws DataError on malformed files or a config hash mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies values into `params`. Every parameter must be present with the
// same shape; throws DataError otherwise.
void restore_parameters(const Checkpoint& checkpoint, std::span<nn::Parameter* const> params);

// Value snapshot for keeping the best epoch in memory.
std::vector<Tensor> snapshot(std::span<nn::Parameter* const> params);
void restore(std::span<nn::Parameter* const> params, const std::vector<Tensor>& values);

}  // namespace pjfit

#include "pjfit/checkpoint.hpp"

#include <cstdio>

#include "pjfit/errors.hpp"
#include "pjfit/io.hpp"

namespace pjfit {

bool Checkpoint::has_section(const std::string& prefix) const {
  auto it = tensors.lower_bound(prefix);
  return it != tensors.end() && it->first.compare(0, prefix.size(), prefix) == 0;
}

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Checkpoint make_checkpoint(const nlohmann::json& config, std::span<nn::Parameter* const> params) {
  Checkpoint c;
  c.config = config;
  c.config_hash = config_hash(config);
  for (const nn::Parameter* p : params) {
    if (!c.tensors.emplace(p->name, p->value).second)
      throw ShapeError("checkpoint: duplicate parameter name " + p->name);
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, t] : c.tensors) {
    params.push_back({{"name", name},
                      {"shape", t.shape()},
                      {"values", std::vector<double>(t.values().begin(), t.values().end())}});
  }
  const nlohmann::json j = {{"format_version", kCheckpointFormatVersion},
                            {"config_hash", c.config_hash},
                            {"config", c.config},
                            {"parameters", params}};
  write_file_atomic(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint c;
  try {
    const auto j = nlohmann::json::parse(read_file(path));
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw DataError("unsupported checkpoint format version");
    c.config = j.at("config");
    c.config_hash = j.at("config_hash").get<std::string>();
    if (c.config_hash != config_hash(c.config))
      throw DataError("checkpoint config hash does not match its config");
    for (const auto& p : j.at("parameters")) {
      Tensor t(p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>());
      if (!t.all_finite()) throw DataError("non-finite value in " + p.at("name").get<std::string>());
      c.tensors.emplace(p.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return c;
}

void restore_parameters(const Checkpoint& c, std::span<nn::Parameter* const> params) {
  for (nn::Parameter* p : params) {
    auto it = c.tensors.find(p->name);
    if (it == c.tensors.end()) throw DataError("checkpoint is missing parameter " + p->name);
    if (it->second.shape() != p->value.shape())
      throw DataError("checkpoint parameter " + p->name + " has shape " +
                      shape_string(it->second.shape()) + ", expected " +
                      shape_string(p->value.shape()));
    p->value = it->second;
  }
}

std::vector<Tensor> snapshot(std::span<nn::Parameter* const> params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const nn::Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(std::span<nn::Parameter* const> params, const std::vector<Tensor>& values) {
  require_size(values.size(), params.size(), "restore");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace pjfit

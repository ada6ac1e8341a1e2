#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "phrlab/a2c.h"
#include "phrlab/envs.h"
#include "phrlab/nn.h"
#include "phrlab/phr.h"

namespace phrlab {

struct BenchSettings {
  std::size_t total_steps = 100000;
  std::vector<std::size_t> horizons = {1, 4, 8, 16};
  std::size_t runs = 5;
  std::size_t warmup_steps = 1000;

  bool operator==(const BenchSettings&) const = default;
};

/// Network shape as written in a config file; input and action sizes come from the env.
struct NetSettings {
  std::vector<std::size_t> hidden_layers = {128, 128};
  std::size_t head_width = 128;
  std::size_t n_heads = 16;

  bool operator==(const NetSettings&) const = default;
};

struct RunConfig {
  EnvConfig env;
  NetSettings net;
  A2CConfig a2c;
  PhrConfig phr;
  BenchSettings bench;
  std::string output_dir = "runs";
  std::uint64_t seed = 0;

  /// Per-environment training defaults (teacher budget, learning rates).
  static RunConfig defaults(EnvKind kind);

  NetSpec net_spec() const;
  /// Copies `seed` into the env, A2C and PHR sub-configs.
  void apply_seed(std::uint64_t value);
  /// Validates every sub-config except PHR (train-phr validates that one itself).
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

/// Strict parse: `env.kind` is required, every other field defaults per kind;
/// unknown keys and wrongly typed values raise ConfigError naming the field.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const EnvConfig& env);
EnvConfig env_from_json(const nlohmann::json& doc, const std::string& where);
nlohmann::json to_json(const NetSpec& spec);
NetSpec net_spec_from_json(const nlohmann::json& doc);

/// Writes `<dir>/effective_config.json`; throws IoError.
void write_effective_config(const std::filesystem::path& dir, const RunConfig& config);

}  // namespace phrlab

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phrlab/envs.h"
#include "phrlab/nn.h"
#include "phrlab/phr.h"

namespace phrlab {

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kExperienceVersion = 1;

enum class Stage { Teacher, PhrStudent };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct TrainingMetadata {
  std::size_t env_steps = 0;
  std::size_t updates = 0;
  std::optional<Measure> measure;
  std::optional<double> lambda;
  std::optional<std::size_t> stride;
  std::optional<std::size_t> horizon;

  bool operator==(const TrainingMetadata&) const = default;
};

struct Checkpoint {
  int version = kCheckpointVersion;
  Stage stage = Stage::Teacher;
  std::uint64_t seed = 0;
  EnvConfig env;
  TrainingMetadata training;
  ModelParams params;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

/// Layout: "PHRCKPT <version>\n", one line of JSON metadata (spec, mask, stage,
/// env, training, payload length and hash), then little-endian float32 parameters.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws CorruptionError (truncated/garbled bytes, hash mismatch) or
/// IncompatibleError (unsupported version).
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Teacher experience D: same framing as checkpoints ("PHREXP <version>").
std::string serialize_experience(std::span<const Trajectory> trajectories);
std::vector<Trajectory> parse_experience(std::string_view bytes);
void save_experience(const std::filesystem::path& path, std::span<const Trajectory> trajectories);
std::vector<Trajectory> load_experience(const std::filesystem::path& path);

/// Whole-file helpers; throw IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace phrlab

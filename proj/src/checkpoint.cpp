#include "phrlab/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phrlab/config.h"
#include "phrlab/error.h"

namespace phrlab {
namespace {

using nlohmann::json;

constexpr std::string_view kCheckpointMagic = "PHRCKPT";
constexpr std::string_view kExperienceMagic = "PHREXP";

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << v;
  return out.str();
}

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& offset) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  if (offset + sizeof(U) > bytes.size()) throw CorruptionError("payload ends early");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(static_cast<std::uint8_t>(bytes[offset + i])) << (8 * i);
  }
  offset += sizeof(U);
  return std::bit_cast<T>(bits);
}

std::uint64_t hash_of(std::string_view bytes) {
  return fnv1a64({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
}

struct Framed {
  json meta;
  std::string_view payload;
};

/// Splits "<magic> <version>\n<json>\n<payload>" and checks version, length and hash.
Framed unframe(std::string_view bytes, std::string_view magic, int supported, std::string_view what) {
  const std::size_t line1 = bytes.find('\n');
  if (line1 == std::string_view::npos) throw CorruptionError(std::string(what) + " header is truncated");
  const std::string_view header = bytes.substr(0, line1);
  if (header.substr(0, magic.size()) != magic || header.size() <= magic.size() + 1 || header[magic.size()] != ' ') {
    throw CorruptionError(std::string(what) + " does not start with " + std::string(magic));
  }
  int version = 0;
  try {
    version = std::stoi(std::string(header.substr(magic.size() + 1)));
  } catch (const std::exception&) {
    throw CorruptionError(std::string(what) + " version field is unreadable");
  }
  if (version != supported) {
    throw IncompatibleError(std::string(what) + " format version " + std::to_string(version) +
                            " is not supported (this build reads version " + std::to_string(supported) + ")");
  }
  const std::size_t line2 = bytes.find('\n', line1 + 1);
  if (line2 == std::string_view::npos) throw CorruptionError(std::string(what) + " metadata is truncated");
  Framed framed;
  try {
    framed.meta = json::parse(bytes.substr(line1 + 1, line2 - line1 - 1));
  } catch (const json::exception& e) {
    throw CorruptionError(std::string(what) + " metadata is unreadable: " + e.what());
  }
  framed.payload = bytes.substr(line2 + 1);
  std::size_t expected = 0;
  std::string hash;
  try {
    expected = framed.meta.at("payload_bytes").get<std::size_t>();
    hash = framed.meta.at("payload_fnv1a64").get<std::string>();
  } catch (const json::exception&) {
    throw CorruptionError(std::string(what) + " metadata lacks payload length or hash");
  }
  if (framed.payload.size() != expected) {
    throw CorruptionError(std::string(what) + " payload has " + std::to_string(framed.payload.size()) +
                          " bytes, expected " + std::to_string(expected));
  }
  if (hex64(hash_of(framed.payload)) != hash) throw CorruptionError(std::string(what) + " payload hash mismatch");
  return framed;
}

std::string frame(std::string_view magic, int version, json meta, const std::string& payload) {
  meta["payload_bytes"] = payload.size();
  meta["payload_fnv1a64"] = hex64(hash_of(payload));
  std::string out = std::string(magic) + " " + std::to_string(version) + "\n" + meta.dump() + "\n";
  out += payload;
  return out;
}

json training_to_json(const TrainingMetadata& t) {
  json doc = {{"env_steps", t.env_steps}, {"updates", t.updates}};
  if (t.measure) doc["measure"] = std::string(to_string(*t.measure));
  if (t.lambda) doc["lambda"] = *t.lambda;
  if (t.stride) doc["stride"] = *t.stride;
  if (t.horizon) doc["horizon"] = *t.horizon;
  return doc;
}

TrainingMetadata training_from_json(const json& doc) {
  TrainingMetadata t;
  t.env_steps = doc.at("env_steps").get<std::size_t>();
  t.updates = doc.at("updates").get<std::size_t>();
  if (doc.contains("measure")) t.measure = parse_measure(doc.at("measure").get<std::string>());
  if (doc.contains("lambda")) t.lambda = doc.at("lambda").get<double>();
  if (doc.contains("stride")) t.stride = doc.at("stride").get<std::size_t>();
  if (doc.contains("horizon")) t.horizon = doc.at("horizon").get<std::size_t>();
  return t;
}

}  // namespace

std::string_view to_string(Stage stage) { return stage == Stage::Teacher ? "teacher" : "phr-student"; }

Stage parse_stage(std::string_view name) {
  if (name == "teacher") return Stage::Teacher;
  if (name == "phr-student") return Stage::PhrStudent;
  throw CorruptionError("unknown checkpoint stage '" + std::string(name) + "'");
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  const std::vector<float> values = c.params.flatten();
  std::string payload;
  payload.reserve(values.size() * 4);
  for (float v : values) put_le(payload, v);
  const Eigen::VectorXd& offset = c.params.input_offset();
  for (Eigen::Index i = 0; i < offset.size(); ++i) put_le(payload, static_cast<float>(offset(i)));
  std::vector<bool> mask = c.params.trainable_mask();
  json meta = {{"stage", std::string(to_string(c.stage))},
               {"seed", c.seed},
               {"net", to_json(c.params.spec())},
               {"trainable", mask},
               {"env", to_json(c.env)},
               {"training", training_to_json(c.training)},
               {"parameters", values.size()},
               {"input_offset", offset.size()}};
  return frame(kCheckpointMagic, c.version, std::move(meta), payload);
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  const Framed framed = unframe(bytes, kCheckpointMagic, kCheckpointVersion, "checkpoint");
  Checkpoint c;
  try {
    const json& meta = framed.meta;
    c.stage = parse_stage(meta.at("stage").get<std::string>());
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.env = env_from_json(meta.at("env"), "env");
    c.training = training_from_json(meta.at("training"));
    const NetSpec spec = net_spec_from_json(meta.at("net"));
    const std::size_t count = meta.at("parameters").get<std::size_t>();
    const std::size_t offsets = meta.at("input_offset").get<std::size_t>();
    if (count != spec.parameter_count() || offsets != spec.input_dim || framed.payload.size() != (count + offsets) * 4) {
      throw CorruptionError("checkpoint payload length does not match its network spec");
    }
    std::vector<float> values(count);
    std::size_t pos = 0;
    for (float& v : values) v = get_le<float>(framed.payload, pos);
    Eigen::VectorXd input_offset(static_cast<Eigen::Index>(offsets));
    for (Eigen::Index i = 0; i < input_offset.size(); ++i) input_offset(i) = get_le<float>(framed.payload, pos);
    c.params = ModelParams::zeros(spec);
    c.params.unflatten(values);
    c.params.set_input_offset(input_offset);
    c.params.set_trainable_mask(meta.at("trainable").get<std::vector<bool>>());
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("checkpoint metadata is malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint metadata is invalid: ") + e.what());
  }
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

std::string serialize_experience(std::span<const Trajectory> trajectories) {
  std::size_t obs_dim = 0;
  std::size_t n_actions = 0;
  json lengths = json::array();
  json terminal = json::array();
  json final_reward = json::array();
  std::string payload;
  for (const Trajectory& traj : trajectories) {
    lengths.push_back(traj.length());
    terminal.push_back(traj.terminal);
    final_reward.push_back(traj.final_reward);
    for (const TrajectoryStep& step : traj.steps) {
      if (obs_dim == 0) {
        obs_dim = step.observation.size();
        n_actions = step.teacher_policy.size();
      }
      if (step.observation.size() != obs_dim || step.teacher_policy.size() != n_actions) {
        throw UsageError("experience steps differ in observation or action size");
      }
      for (float v : step.observation) put_le(payload, v);
      for (double p : step.teacher_policy) put_le(payload, p);
      put_le(payload, static_cast<std::int32_t>(step.action));
      put_le(payload, step.reward);
    }
  }
  json meta = {{"trajectories", trajectories.size()},
               {"observation_size", obs_dim},
               {"n_actions", n_actions},
               {"lengths", lengths},
               {"terminal", terminal},
               {"final_reward", final_reward}};
  return frame(kExperienceMagic, kExperienceVersion, std::move(meta), payload);
}

std::vector<Trajectory> parse_experience(std::string_view bytes) {
  const Framed framed = unframe(bytes, kExperienceMagic, kExperienceVersion, "experience file");
  std::vector<Trajectory> out;
  try {
    const json& meta = framed.meta;
    const auto obs_dim = meta.at("observation_size").get<std::size_t>();
    const auto n_actions = meta.at("n_actions").get<std::size_t>();
    const auto lengths = meta.at("lengths").get<std::vector<std::size_t>>();
    const auto terminal = meta.at("terminal").get<std::vector<bool>>();
    const auto final_reward = meta.at("final_reward").get<std::vector<double>>();
    if (lengths.size() != meta.at("trajectories").get<std::size_t>() || terminal.size() != lengths.size() ||
        final_reward.size() != lengths.size()) {
      throw CorruptionError("experience metadata lists disagree in length");
    }
    std::size_t offset = 0;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      Trajectory traj;
      traj.terminal = terminal[k];
      traj.final_reward = final_reward[k];
      traj.steps.resize(lengths[k]);
      for (TrajectoryStep& step : traj.steps) {
        step.observation.resize(obs_dim);
        for (float& v : step.observation) v = get_le<float>(framed.payload, offset);
        step.teacher_policy.resize(n_actions);
        for (double& p : step.teacher_policy) p = get_le<double>(framed.payload, offset);
        step.action = get_le<std::int32_t>(framed.payload, offset);
        step.reward = get_le<double>(framed.payload, offset);
      }
      out.push_back(std::move(traj));
    }
    if (offset != framed.payload.size()) throw CorruptionError("experience payload has trailing bytes");
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("experience metadata is malformed: ") + e.what());
  }
  return out;
}

void save_experience(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  write_file(path, serialize_experience(trajectories));
}

std::vector<Trajectory> load_experience(const std::filesystem::path& path) {
  return parse_experience(read_file(path));
}

}  // namespace phrlab

#include "phrlab/config.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "phrlab/error.h"

namespace phrlab {
namespace {

using nlohmann::json;

template <typename T>
constexpr const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_integral_v<T>) return "a non-negative integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_same_v<T, std::string>) return "a string";
  else return "a list of non-negative integers";
}

/// Reads fields of one JSON object, remembering which keys were consumed.
class FieldReader {
 public:
  FieldReader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const char* key) const { return doc_.contains(key); }

  template <typename T>
  void read(const char* key, T& out) {
    if (!doc_.contains(key)) return;
    used_.insert(key);
    const json& v = doc_.at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) ok = v.is_boolean();
    else if constexpr (std::is_integral_v<T>) ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    else if constexpr (std::is_floating_point_v<T>) ok = v.is_number();
    else if constexpr (std::is_same_v<T, std::string>) ok = v.is_string();
    else ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_unsigned(); });
    if (!ok) throw ConfigError(field(key) + " must be " + type_name<T>());
    out = v.get<T>();
  }

  const json& child(const char* key) {
    used_.insert(key);
    return doc_.at(key);
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!used_.contains(key)) throw ConfigError("unknown field " + field(key.c_str()));
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> used_;
};

EnvKind read_kind(FieldReader& reader) {
  if (!reader.has("kind")) throw ConfigError("missing field " + reader.field("kind"));
  std::string kind;
  reader.read("kind", kind);
  return parse_env_kind(kind);
}

void read_env_fields(FieldReader& r, EnvConfig& env) {
  r.read("width", env.width);
  r.read("height", env.height);
  r.read("max_steps", env.max_steps);
  r.read("seed", env.seed);
}

}  // namespace

RunConfig RunConfig::defaults(EnvKind kind) {
  RunConfig c;
  c.env = EnvConfig::defaults(kind);
  c.a2c.lr = 3e-4;
  c.a2c.total_steps = 500000;
  c.a2c.eval_interval = 25000;
  if (kind == EnvKind::MiniPong) {
    c.a2c.eval_episodes = 2;
  } else {
    c.a2c.entropy_coef = 0.001;
  }
  c.phr.lambda = default_lambda(c.phr.measure);
  return c;
}

NetSpec RunConfig::net_spec() const {
  NetSpec spec;
  spec.input_dim = observation_size(env);
  spec.n_actions = static_cast<std::size_t>(num_actions(env.kind));
  spec.hidden_layers = net.hidden_layers;
  spec.head_width = net.head_width;
  spec.n_heads = net.n_heads;
  return spec;
}

void RunConfig::apply_seed(std::uint64_t value) {
  seed = value;
  env.seed = value;
  a2c.seed = value;
  phr.seed = value;
}

void RunConfig::validate() const {
  env.validate();
  net_spec().validate();
  a2c.validate();
  if (bench.runs < 1) throw ConfigError("bench.runs must be >= 1");
  if (bench.horizons.empty()) throw ConfigError("bench.horizons must not be empty");
  for (std::size_t n : bench.horizons) {
    if (n < 1 || n > net.n_heads) {
      throw ConfigError("bench.horizons entry " + std::to_string(n) + " is outside 1.." + std::to_string(net.n_heads) +
                        " (net.n_heads)");
    }
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

EnvConfig env_from_json(const json& doc, const std::string& where) {
  FieldReader r(doc, where);
  EnvConfig env = EnvConfig::defaults(read_kind(r));
  read_env_fields(r, env);
  r.finish();
  return env;
}

RunConfig parse_run_config(const json& doc) {
  FieldReader top(doc, "");
  if (!top.has("env")) throw ConfigError("missing field env.kind");
  FieldReader env_reader(top.child("env"), "env");
  RunConfig c = RunConfig::defaults(read_kind(env_reader));
  top.read("seed", c.seed);
  c.apply_seed(c.seed);
  read_env_fields(env_reader, c.env);
  env_reader.finish();

  top.read("output_dir", c.output_dir);
  if (top.has("net")) {
    FieldReader r(top.child("net"), "net");
    r.read("hidden_layers", c.net.hidden_layers);
    r.read("head_width", c.net.head_width);
    r.read("n_heads", c.net.n_heads);
    r.finish();
  }
  if (top.has("a2c")) {
    FieldReader r(top.child("a2c"), "a2c");
    r.read("workers", c.a2c.workers);
    r.read("rollout_len", c.a2c.rollout_len);
    r.read("gamma", c.a2c.gamma);
    r.read("value_coef", c.a2c.value_coef);
    r.read("entropy_coef", c.a2c.entropy_coef);
    r.read("total_steps", c.a2c.total_steps);
    r.read("lr", c.a2c.lr);
    r.read("max_grad_norm", c.a2c.max_grad_norm);
    r.read("seed", c.a2c.seed);
    r.read("eval_interval", c.a2c.eval_interval);
    r.read("eval_episodes", c.a2c.eval_episodes);
    r.read("center_probe_steps", c.a2c.center_probe_steps);
    r.finish();
  }
  if (top.has("phr")) {
    FieldReader r(top.child("phr"), "phr");
    std::string measure(to_string(c.phr.measure));
    r.read("measure", measure);
    c.phr.measure = parse_measure(measure);
    c.phr.lambda = default_lambda(c.phr.measure);
    r.read("horizon", c.phr.horizon);
    r.read("stride", c.phr.stride);
    r.read("lambda", c.phr.lambda);
    r.read("episodes", c.phr.episodes);
    r.read("trunk_frozen", c.phr.trunk_frozen);
    r.read("lr", c.phr.lr);
    r.read("seed", c.phr.seed);
    r.read("batch_size", c.phr.batch_size);
    r.read("replay_ratio", c.phr.replay_ratio);
    r.read("replay_capacity", c.phr.replay_capacity);
    r.read("validation_episodes", c.phr.validation_episodes);
    r.read("validation_interval", c.phr.validation_interval);
    r.read("add_policy_gradient", c.phr.add_policy_gradient);
    r.read("probe_window", c.phr.probe_window);
    r.finish();
  }
  std::erase_if(c.bench.horizons, [&](std::size_t n) { return n > c.net.n_heads; });
  if (top.has("bench")) {
    FieldReader r(top.child("bench"), "bench");
    r.read("total_steps", c.bench.total_steps);
    r.read("horizons", c.bench.horizons);
    r.read("runs", c.bench.runs);
    r.read("warmup_steps", c.bench.warmup_steps);
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const EnvConfig& env) {
  return {{"kind", std::string(to_string(env.kind))},
          {"width", env.width},
          {"height", env.height},
          {"max_steps", env.max_steps},
          {"seed", env.seed}};
}

json to_json(const NetSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden_layers", spec.hidden_layers},
          {"head_width", spec.head_width},
          {"n_heads", spec.n_heads},
          {"n_actions", spec.n_actions}};
}

NetSpec net_spec_from_json(const json& doc) {
  FieldReader r(doc, "net");
  NetSpec spec;
  r.read("input_dim", spec.input_dim);
  r.read("hidden_layers", spec.hidden_layers);
  r.read("head_width", spec.head_width);
  r.read("n_heads", spec.n_heads);
  r.read("n_actions", spec.n_actions);
  r.finish();
  spec.validate();
  return spec;
}

json to_json(const RunConfig& c) {
  json doc;
  doc["seed"] = c.seed;
  doc["output_dir"] = c.output_dir;
  doc["env"] = to_json(c.env);
  doc["net"] = {{"hidden_layers", c.net.hidden_layers}, {"head_width", c.net.head_width}, {"n_heads", c.net.n_heads}};
  doc["a2c"] = {{"workers", c.a2c.workers},
                {"rollout_len", c.a2c.rollout_len},
                {"gamma", c.a2c.gamma},
                {"value_coef", c.a2c.value_coef},
                {"entropy_coef", c.a2c.entropy_coef},
                {"total_steps", c.a2c.total_steps},
                {"lr", c.a2c.lr},
                {"max_grad_norm", c.a2c.max_grad_norm},
                {"seed", c.a2c.seed},
                {"eval_interval", c.a2c.eval_interval},
                {"eval_episodes", c.a2c.eval_episodes},
                {"center_probe_steps", c.a2c.center_probe_steps}};
  doc["phr"] = {{"horizon", c.phr.horizon},
                {"stride", c.phr.stride},
                {"lambda", c.phr.lambda},
                {"measure", std::string(to_string(c.phr.measure))},
                {"episodes", c.phr.episodes},
                {"trunk_frozen", c.phr.trunk_frozen},
                {"lr", c.phr.lr},
                {"seed", c.phr.seed},
                {"batch_size", c.phr.batch_size},
                {"replay_ratio", c.phr.replay_ratio},
                {"replay_capacity", c.phr.replay_capacity},
                {"validation_episodes", c.phr.validation_episodes},
                {"validation_interval", c.phr.validation_interval},
                {"add_policy_gradient", c.phr.add_policy_gradient},
                {"probe_window", c.phr.probe_window}};
  doc["bench"] = {{"total_steps", c.bench.total_steps},
                  {"horizons", c.bench.horizons},
                  {"runs", c.bench.runs},
                  {"warmup_steps", c.bench.warmup_steps}};
  return doc;
}

void write_effective_config(const std::filesystem::path& dir, const RunConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / "effective_config.json";
  std::ofstream out(path);
  if (ec || !out) throw IoError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace phrlab

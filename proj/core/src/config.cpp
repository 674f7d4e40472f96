#include "vrff/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace vrff {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw std::invalid_argument("config: " + message);
}

std::string join_path(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

void require_object(const json& value, const std::string& path) {
  if (!value.is_object()) fail("field '" + path + "' must be an object");
}

void reject_unknown_keys(const json& obj, const std::string& scope,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) fail("unknown key '" + join_path(scope, key) + "'");
  }
}

double get_double(const json& obj, const std::string& scope, const char* key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail("field '" + join_path(scope, key) + "' must be a number");
  return v.get<double>();
}

int64_t get_int(const json& obj, const std::string& scope, const char* key,
                int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    fail("field '" + join_path(scope, key) + "' must be an integer");
  }
  return v.get<int64_t>();
}

uint64_t get_u64(const json& obj, const std::string& scope, const char* key,
                 uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<int64_t>() < 0)) {
    fail("field '" + join_path(scope, key) + "' must be a non-negative integer");
  }
  return v.get<uint64_t>();
}

std::string get_string(const json& obj, const std::string& scope, const char* key) {
  if (!obj.contains(key)) fail("missing required field '" + join_path(scope, key) + "'");
  const json& v = obj.at(key);
  if (!v.is_string()) fail("field '" + join_path(scope, key) + "' must be a string");
  return v.get<std::string>();
}

std::string get_string_or(const json& obj, const std::string& scope, const char* key,
                          const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) fail("field '" + join_path(scope, key) + "' must be a string");
  return v.get<std::string>();
}

EpisodeSource parse_task(const json& obj) {
  require_object(obj, "task");
  std::string kind = get_string(obj, "task", "kind");
  if (kind == "sine") {
    reject_unknown_keys(obj, "task",
                        {"kind", "amplitude_lo", "amplitude_hi", "phase_lo", "phase_hi",
                         "input_lo", "input_hi", "noise_std", "shots", "query_count"});
    SineEpisodes episodes;
    SineTaskSpec defaults;
    episodes.spec.amplitude_lo = get_double(obj, "task", "amplitude_lo", defaults.amplitude_lo);
    episodes.spec.amplitude_hi = get_double(obj, "task", "amplitude_hi", defaults.amplitude_hi);
    episodes.spec.phase_lo = get_double(obj, "task", "phase_lo", defaults.phase_lo);
    episodes.spec.phase_hi = get_double(obj, "task", "phase_hi", defaults.phase_hi);
    episodes.spec.input_lo = get_double(obj, "task", "input_lo", defaults.input_lo);
    episodes.spec.input_hi = get_double(obj, "task", "input_hi", defaults.input_hi);
    episodes.spec.noise_std = get_double(obj, "task", "noise_std", defaults.noise_std);
    episodes.shots = static_cast<int>(get_int(obj, "task", "shots", episodes.shots));
    episodes.query_count =
        static_cast<int>(get_int(obj, "task", "query_count", episodes.query_count));
    return episodes;
  }
  if (kind == "cluster") {
    reject_unknown_keys(obj, "task",
                        {"kind", "dim", "ways", "shots", "center_scale", "spread",
                         "query_per_class"});
    ClusterEpisodes episodes;
    episodes.spec.dim = static_cast<int>(get_int(obj, "task", "dim", episodes.spec.dim));
    episodes.spec.ways = static_cast<int>(get_int(obj, "task", "ways", episodes.spec.ways));
    episodes.spec.shots =
        static_cast<int>(get_int(obj, "task", "shots", episodes.spec.shots));
    episodes.spec.center_scale =
        get_double(obj, "task", "center_scale", episodes.spec.center_scale);
    episodes.spec.spread = get_double(obj, "task", "spread", episodes.spec.spread);
    episodes.query_per_class =
        static_cast<int>(get_int(obj, "task", "query_per_class", episodes.query_per_class));
    return episodes;
  }
  fail("field 'task.kind' must be 'sine' or 'cluster', got '" + kind + "'");
}

TrainConfig parse_train(const json& obj) {
  require_object(obj, "train");
  reject_unknown_keys(obj, "train",
                      {"learning_rate", "iterations", "episodes_per_iteration",
                       "basis_count", "ridge", "kl_weight", "likelihood_noise", "mode",
                       "feature_width", "hidden_width", "prior_aggregation", "eval_mode"});
  TrainConfig cfg;
  cfg.learning_rate = get_double(obj, "train", "learning_rate", cfg.learning_rate);
  cfg.iterations = get_int(obj, "train", "iterations", cfg.iterations);
  cfg.episodes_per_iteration = static_cast<int>(
      get_int(obj, "train", "episodes_per_iteration", cfg.episodes_per_iteration));
  cfg.basis_count = get_int(obj, "train", "basis_count", cfg.basis_count);
  cfg.ridge = get_double(obj, "train", "ridge", cfg.ridge);
  cfg.kl_weight = get_double(obj, "train", "kl_weight", cfg.kl_weight);
  cfg.likelihood_noise = get_double(obj, "train", "likelihood_noise", cfg.likelihood_noise);
  cfg.mode = recurrent_mode_from_string(get_string_or(obj, "train", "mode", "lstm"));
  cfg.feature_width = get_int(obj, "train", "feature_width", cfg.feature_width);
  cfg.hidden_width = get_int(obj, "train", "hidden_width", cfg.hidden_width);
  cfg.prior_aggregation = prior_aggregation_from_string(
      get_string_or(obj, "train", "prior_aggregation", "average-parameters"));
  cfg.eval_mode = eval_mode_from_string(get_string_or(obj, "train", "eval_mode", "mean"));
  return cfg;
}

Seeds parse_seeds(const json& obj) {
  require_object(obj, "seeds");
  reject_unknown_keys(obj, "seeds", {"tasks", "init", "sampling"});
  Seeds seeds;
  seeds.tasks = get_u64(obj, "seeds", "tasks", seeds.tasks);
  seeds.init = get_u64(obj, "seeds", "init", seeds.init);
  seeds.sampling = get_u64(obj, "seeds", "sampling", seeds.sampling);
  return seeds;
}

json task_json(const EpisodeSource& source) {
  json j;
  if (const auto* sine = std::get_if<SineEpisodes>(&source)) {
    j["kind"] = "sine";
    j["amplitude_lo"] = sine->spec.amplitude_lo;
    j["amplitude_hi"] = sine->spec.amplitude_hi;
    j["phase_lo"] = sine->spec.phase_lo;
    j["phase_hi"] = sine->spec.phase_hi;
    j["input_lo"] = sine->spec.input_lo;
    j["input_hi"] = sine->spec.input_hi;
    j["noise_std"] = sine->spec.noise_std;
    j["shots"] = sine->shots;
    j["query_count"] = sine->query_count;
  } else {
    const auto& cluster = std::get<ClusterEpisodes>(source);
    j["kind"] = "cluster";
    j["dim"] = cluster.spec.dim;
    j["ways"] = cluster.spec.ways;
    j["shots"] = cluster.spec.shots;
    j["center_scale"] = cluster.spec.center_scale;
    j["spread"] = cluster.spec.spread;
    j["query_per_class"] = cluster.query_per_class;
  }
  return j;
}

json train_json(const TrainConfig& cfg) {
  json j;
  j["learning_rate"] = cfg.learning_rate;
  j["iterations"] = cfg.iterations;
  j["episodes_per_iteration"] = cfg.episodes_per_iteration;
  j["basis_count"] = cfg.basis_count;
  j["ridge"] = cfg.ridge;
  j["kl_weight"] = cfg.kl_weight;
  j["likelihood_noise"] = cfg.likelihood_noise;
  j["mode"] = to_string(cfg.mode);
  j["feature_width"] = cfg.feature_width;
  j["hidden_width"] = cfg.hidden_width;
  j["prior_aggregation"] = to_string(cfg.prior_aggregation);
  j["eval_mode"] = to_string(cfg.eval_mode);
  return j;
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  std::visit([](const auto& episodes) {
    episodes.spec.validate();
  }, source);
  if (const auto* sine = std::get_if<SineEpisodes>(&source)) {
    if (sine->shots < 1) fail("field 'task.shots' must be >= 1");
    if (sine->query_count < 1) fail("field 'task.query_count' must be >= 1");
  } else if (const auto* cluster = std::get_if<ClusterEpisodes>(&source)) {
    if (cluster->query_per_class < 1) fail("field 'task.query_per_class' must be >= 1");
  }
  if (output_dir.empty()) fail("missing required field 'output_dir'");
  if (eval_episodes < 1) fail("field 'eval_episodes' must be >= 1");
  if (log_cadence < 1) fail("field 'log_cadence' must be >= 1");
  if (checkpoint_cadence < 1) fail("field 'checkpoint_cadence' must be >= 1");
}

std::string RunConfig::canonical_model_json() const {
  json j;
  j["task"] = task_json(source);
  j["train"] = train_json(train);
  return j.dump();
}

std::string RunConfig::config_hash() const {
  std::string text = canonical_model_json();
  uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << hash;
  return out.str();
}

std::string RunConfig::echo_json() const {
  json j;
  j["task"] = task_json(source);
  j["train"] = train_json(train);
  j["seeds"] = {{"tasks", seeds.tasks}, {"init", seeds.init}, {"sampling", seeds.sampling}};
  j["output_dir"] = output_dir;
  j["eval_episodes"] = eval_episodes;
  j["log_cadence"] = log_cadence;
  j["checkpoint_cadence"] = checkpoint_cadence;
  return j.dump(2);
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    fail(std::string("not valid JSON: ") + err.what());
  }
  if (!root.is_object()) fail("top level must be an object");
  reject_unknown_keys(root, "",
                      {"task", "train", "seeds", "output_dir", "eval_episodes",
                       "log_cadence", "checkpoint_cadence"});
  if (!root.contains("task")) fail("missing required field 'task'");

  RunConfig cfg;
  cfg.source = parse_task(root.at("task"));
  if (root.contains("train")) cfg.train = parse_train(root.at("train"));
  if (root.contains("seeds")) cfg.seeds = parse_seeds(root.at("seeds"));
  cfg.output_dir = get_string(root, "", "output_dir");
  cfg.eval_episodes = get_int(root, "", "eval_episodes", cfg.eval_episodes);
  cfg.log_cadence = get_int(root, "", "log_cadence", cfg.log_cadence);
  cfg.checkpoint_cadence = get_int(root, "", "checkpoint_cadence", cfg.checkpoint_cadence);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

void apply_seed_override(RunConfig& config, const std::string& key_value) {
  auto eq = key_value.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= key_value.size()) {
    throw std::invalid_argument("seed override must look like name=value, got '" +
                                key_value + "'");
  }
  std::string key = key_value.substr(0, eq);
  std::string value = key_value.substr(eq + 1);
  uint64_t parsed = 0;
  size_t used = 0;
  try {
    parsed = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size()) {
    throw std::invalid_argument("seed override value must be a non-negative integer, got '" +
                                value + "'");
  }
  if (key == "tasks") config.seeds.tasks = parsed;
  else if (key == "init") config.seeds.init = parsed;
  else if (key == "sampling") config.seeds.sampling = parsed;
  else {
    throw std::invalid_argument("unknown seed override '" + key +
                                "' (expected tasks, init, or sampling)");
  }
}

}  // namespace vrff

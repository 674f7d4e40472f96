#pragma once

#include <cstdint>
#include <string>

#include "vrff/tasks.hpp"
#include "vrff/trainer.hpp"

namespace vrff {

/// Everything a run needs, parsed from one JSON config file. Unknown keys
/// are rejected at every nesting level; missing required fields are named.
struct RunConfig {
  EpisodeSource source;
  TrainConfig train;
  Seeds seeds;
  std::string output_dir;
  int64_t eval_episodes = 200;
  int64_t log_cadence = 100;
  int64_t checkpoint_cadence = 1000;

  void validate() const;

  /// Canonical JSON (sorted keys, defaults filled in) of the model-relevant
  /// sections (task + train). Seeds, cadences, and paths are excluded so a
  /// checkpoint stays loadable under a different seed or output location.
  std::string canonical_model_json() const;

  /// FNV-1a 64-bit hex of canonical_model_json().
  std::string config_hash() const;

  /// Full effective config (defaults applied) as JSON, for echoes.
  std::string echo_json() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// Applies "tasks=N" / "init=N" / "sampling=N" to the seed block.
void apply_seed_override(RunConfig& config, const std::string& key_value);

}  // namespace vrff

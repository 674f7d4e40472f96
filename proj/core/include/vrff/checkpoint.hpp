#pragma once

#include <string>

#include "vrff/config.hpp"
#include "vrff/trainer.hpp"

namespace vrff {

inline constexpr int kCheckpointFormatVersion = 1;

/// Path of the raw-double sidecar belonging to a checkpoint JSON path
/// (extension swapped to .bin).
std::string checkpoint_sidecar_path(const std::string& json_path);

/// Writes the checkpoint JSON (decimal floats, full metadata) plus the
/// little-endian binary sidecar that guarantees a bit-exact round trip.
void save_checkpoint(const std::string& json_path, Trainer& trainer,
                     const RunConfig& config);

/// Restores parameters, optimizer moments, and counters in place. Refuses
/// format-version, config-hash, and name/shape mismatches with the exact
/// difference named. Values come from the sidecar when it exists, else from
/// the JSON decimals. Pass an empty expected hash to skip the hash check.
void load_checkpoint(const std::string& json_path, Trainer& trainer,
                     const std::string& expected_config_hash);

}  // namespace vrff

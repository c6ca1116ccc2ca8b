#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "svs/trainer.hpp"

namespace svs::train {

struct CheckpointMeta {
    int64_t epoch = 1;
    int64_t step = 0;
    int64_t epoch_step = 0;
    TrainConfig config;
};

// Writes the archive atomically plus a JSON sidecar (same stem, .json) with
// the counters, schedule stage, resolved config and state digests.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);

// Restores parameters, optimizer moments, counters and RNG streams.
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path);
// As above, but a stored config different from `expected` is a ConfigError.
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path, const TrainConfig& expected);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace svs::train

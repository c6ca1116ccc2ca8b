#pragma once

#include <cstdint>
#include <vector>

namespace svs::train {

struct StageBoundary {
    int64_t start_epoch;
    int64_t seq_len;
    bool operator==(const StageBoundary&) const = default;
};

// Progressive sequence-length ramp followed by a linear learning-rate decay,
// and an optional ramp restarted after each spatial growth step.
struct TrainSchedule {
    std::vector<StageBoundary> ramp{{1, 6}, {6, 12}, {11, 24}, {16, 30}};
    int64_t constant_epochs = 20;  // epochs 1..20 at base_lr
    int64_t decay_epochs = 20;     // epochs 21..40, lr reaching 0 at the last one
    int64_t post_growth_epochs = 8;
    // Post-growth ramp step, in epochs.
    int64_t post_growth_step = 2;
    double base_lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;

    int64_t main_epochs() const { return constant_epochs + decay_epochs; }
    int64_t total_epochs() const { return main_epochs() + post_growth_epochs; }
    bool operator==(const TrainSchedule&) const = default;
};

void validate(const TrainSchedule& schedule);

struct Stage {
    int64_t seq_len;
    double lr;
    // 0 before growth, otherwise epochs since the growth started (1-based).
    int64_t post_growth_epoch = 0;
};

// Epochs are 1-based. Beyond the decay window, epochs belong to the
// post-growth phase: the ramp restarts every post_growth_step epochs at base_lr.
Stage resolve_stage(const TrainSchedule& schedule, int64_t epoch);

}  // namespace svs::train

#include "svs/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svs/error.hpp"

namespace svs::train {

void validate(const TrainSchedule& s) {
    if (s.ramp.empty()) throw ConfigError("schedule: empty sequence-length ramp");
    if (s.ramp.front().start_epoch != 1) throw ConfigError("schedule: ramp must start at epoch 1");
    for (size_t i = 0; i < s.ramp.size(); ++i) {
        if (s.ramp[i].seq_len < 2) throw ConfigError("schedule: sequence length must be >= 2");
        if (i > 0 && (s.ramp[i].start_epoch <= s.ramp[i - 1].start_epoch || s.ramp[i].seq_len < s.ramp[i - 1].seq_len)) {
            throw ConfigError("schedule: ramp must have increasing epochs and non-decreasing lengths");
        }
    }
    if (s.constant_epochs < s.ramp.back().start_epoch) throw ConfigError("schedule: ramp extends past constant-lr epochs");
    if (s.decay_epochs < 0 || s.post_growth_epochs < 0 || s.post_growth_step < 1) {
        throw ConfigError("schedule: epoch counts must be non-negative");
    }
    if (!(s.base_lr > 0.0) || !std::isfinite(s.base_lr)) throw ConfigError("schedule: base_lr must be positive");
    if (!(s.beta1 >= 0.0 && s.beta1 < 1.0) || !(s.beta2 >= 0.0 && s.beta2 < 1.0)) {
        throw ConfigError("schedule: adam betas must lie in [0, 1)");
    }
}

namespace {

int64_t ramp_length(const TrainSchedule& s, int64_t ramp_epoch) {
    int64_t len = s.ramp.front().seq_len;
    for (const auto& b : s.ramp) {
        if (ramp_epoch >= b.start_epoch) len = b.seq_len;
    }
    return len;
}

}  // namespace

Stage resolve_stage(const TrainSchedule& s, int64_t epoch) {
    if (epoch < 1) throw IndexError("schedule: epoch must be >= 1, got " + std::to_string(epoch));
    if (epoch <= s.constant_epochs) return {ramp_length(s, epoch), s.base_lr, 0};
    if (epoch <= s.main_epochs()) {
        const double remaining = static_cast<double>(s.main_epochs() - epoch);
        return {s.ramp.back().seq_len, s.base_lr * remaining / static_cast<double>(s.decay_epochs), 0};
    }
    if (epoch > s.total_epochs()) {
        throw IndexError("schedule: epoch " + std::to_string(epoch) + " is past the last scheduled epoch " +
                         std::to_string(s.total_epochs()));
    }
    const int64_t pg = epoch - s.main_epochs();
    // Map the post-growth epoch onto the ramp index: step k covers ramp entry k.
    const auto idx = std::min<int64_t>((pg - 1) / s.post_growth_step, static_cast<int64_t>(s.ramp.size()) - 1);
    return {s.ramp[static_cast<size_t>(idx)].seq_len, s.base_lr, pg};
}

}  // namespace svs::train

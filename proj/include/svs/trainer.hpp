#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "svs/discriminators.hpp"
#include "svs/extractors.hpp"
#include "svs/generator.hpp"
#include "svs/losses.hpp"
#include "svs/scene_forge.hpp"
#include "svs/schedule.hpp"

namespace svs::train {

enum class DetachPolicy { Detach, FullBackprop };
enum class FeatureMatchSource { Both, Image, Video };

struct TrainConfig {
    gen::GeneratorConfig generator;
    disc::DiscIConfig disc_image;
    disc::DiscVConfig disc_video;
    loss::LossWeights weights;
    TrainSchedule schedule;
    // false: the segmentation discriminator and its losses are replaced by a
    // label-conditioned multi-scale patch discriminator.
    bool use_oasis = true;
    loss::AdvObjective adversarial = loss::AdvObjective::Hinge;
    FeatureMatchSource fm_source = FeatureMatchSource::Both;
    DetachPolicy detach = DetachPolicy::Detach;
    // Training sequences start at a random offset when the sample is longer
    // than the scheduled length; false always starts at frame 0.
    bool random_crop = true;
    // 0: one epoch = one pass over the dataset.
    int64_t steps_per_epoch = 0;
    // Feature-matching weights (loss.fm_layers) index the concatenated
    // feature lists of the discriminators in use: image D first, then each
    // video D by rate.
    // Sequences accumulated into one optimizer update.
    int64_t batch_sequences = 1;
    std::uint64_t seed = 0;
    std::uint64_t extractor_seed = 1234;

    bool operator==(const TrainConfig&) const = default;
};

// Cross-module consistency (class counts, patch depths, layer weight lengths).
void validate(const TrainConfig& config);

// Everything a training run mutates.
struct TrainState {
    explicit TrainState(TrainConfig config);

    TrainConfig config;
    gen::Generator generator{nullptr};
    disc::SegmentationDiscriminator disc_image{nullptr};
    disc::ConditionalPatchDiscriminator disc_patch{nullptr};
    std::vector<disc::VideoDiscriminator> disc_video;
    nn::FrozenConvStack perceptual{nullptr};
    std::unique_ptr<torch::optim::Adam> opt_g;
    std::unique_ptr<torch::optim::Adam> opt_d;

    int64_t epoch = 1;      // 1-based epoch of the next step
    int64_t step = 0;       // completed optimizer steps
    int64_t epoch_step = 0; // completed steps inside the current epoch
    std::mt19937_64 sampler;
    at::Generator noise_rng;

    std::vector<torch::Tensor> discriminator_parameters() const;
    // Side length multiplier of training data relative to stored samples.
    int64_t data_scale() const { return int64_t{1} << config.generator.growth_levels; }
    Stage stage() const { return resolve_stage(config.schedule, epoch); }
};

struct RolloutResult {
    // frames[0] is the real reference; frames[t] for t >= 1 are generated.
    std::vector<torch::Tensor> frames;
    std::vector<gen::GeneratorOutput> outputs;
    // [T_used - 1, 3, H, W] generated frames 1..T_used-1.
    torch::Tensor generated() const;
};

// Autoregressive rollout over the first t_used frames of a sample (batch of
// one sequence). Under DetachPolicy::Detach the previous generated frame is
// detached before it is fed back.
RolloutResult rollout(gen::Generator& generator, const forge::VideoSample& sample, int64_t t_used,
                      DetachPolicy policy = DetachPolicy::Detach, const at::Generator* noise_rng = nullptr);

// Bilinear/nearest upsampling of a sample by an integer factor; flows are scaled.
forge::VideoSample upscale_sample(const forge::VideoSample& sample, int64_t factor);

// One D update followed by one G update on the given sequences. Throws
// NumericalError naming the first non-finite loss term.
loss::LossReport train_step(TrainState& state, std::span<const forge::VideoSample> batch);

// Grows the generator by one level, doubles data resolution and moves the
// schedule to the first post-growth epoch. Existing optimizer moments are kept.
void spatial_progression(TrainState& state);

// Sets every optimizer's learning rate to the scheduled one.
void apply_learning_rate(TrainState& state);

// One JSON object per line: step, epoch, seq_len, lr and the report fields.
std::string log_record(const TrainState& state, const Stage& stage, const loss::LossReport& report);

using SampleSource = std::function<forge::VideoSample(int64_t index)>;

// Runs training until `until_epoch` is complete (inclusive) or `max_steps`
// steps have been taken (<= 0: unlimited), reading sequences in a per-epoch
// shuffled order. `on_step` runs after every step.
void run_training(TrainState& state, int64_t dataset_size, const SampleSource& source, int64_t until_epoch,
                  int64_t max_steps, std::ostream* log,
                  const std::function<void(const TrainState&, const loss::LossReport&)>& on_step = {});

}  // namespace svs::train

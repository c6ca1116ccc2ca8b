#pragma once

#include <vector>

#include <torch/torch.h>

#include "svs/layers.hpp"

namespace svs::disc {

struct DiscIConfig {
    int64_t num_classes = 4;
    int64_t levels = 3;
    int64_t base_channels = 32;
    int64_t channel_cap = 256;
    bool spectral_norm = true;

    int64_t output_channels() const { return num_classes + 1; }
    bool operator==(const DiscIConfig&) const = default;
};

struct DiscVConfig {
    int64_t num_classes = 4;
    int64_t frames_per_window = 3;
    std::vector<int64_t> temporal_rates{1, 2};
    int64_t patch_levels = 3;
    int64_t base_channels = 32;
    int64_t channel_cap = 256;
    bool spectral_norm = true;
    bool operator==(const DiscVConfig&) const = default;
};

void validate(const DiscIConfig& config);
void validate(const DiscVConfig& config);

struct DiscOutput {
    // Segmentation discriminator: one [B, N+1, H, W] tensor. Patch
    // discriminators: one [B, 1, h, w] tensor per patch level.
    std::vector<torch::Tensor> logits;
    // Intermediate activations for feature matching, shallow to deep.
    std::vector<torch::Tensor> features;
};

// U-Net segmentation discriminator with N+1 output classes (the last one is
// "fake"). Features: encoder stages then decoder stages, 2 * levels in total.
class SegmentationDiscriminatorImpl : public torch::nn::Module {
public:
    explicit SegmentationDiscriminatorImpl(DiscIConfig config);

    const DiscIConfig& config() const { return config_; }
    DiscOutput forward(const torch::Tensor& image);

private:
    DiscIConfig config_;
    std::vector<nn::Conv> down;
    std::vector<nn::Conv> up;
    nn::Conv head{nullptr};
};
TORCH_MODULE(SegmentationDiscriminator);

// Strided conv stack with a 1x1 logit head after every stage; stage l yields
// logits at input / 2^l.
class PatchDiscriminatorImpl : public torch::nn::Module {
public:
    PatchDiscriminatorImpl(int64_t in_channels, int64_t levels, int64_t base_channels, int64_t channel_cap,
                           bool spectral);

    DiscOutput forward(const torch::Tensor& x);
    int64_t levels() const { return static_cast<int64_t>(stages.size()); }

private:
    int64_t in_channels_;
    std::vector<nn::Conv> stages;
    std::vector<nn::Conv> heads;
};
TORCH_MODULE(PatchDiscriminator);

// Patch discriminator over K consecutive (subsampled) frames and their one-hot
// label maps, concatenated along channels.
class VideoDiscriminatorImpl : public torch::nn::Module {
public:
    VideoDiscriminatorImpl(DiscVConfig config, int64_t rate);

    int64_t rate() const { return rate_; }
    const DiscVConfig& config() const { return config_; }
    // clip: [B, K, 3, H, W]; labels: [B, K, H, W].
    DiscOutput forward(const torch::Tensor& clip, const torch::Tensor& labels);

private:
    DiscVConfig config_;
    int64_t rate_;
    PatchDiscriminator net{nullptr};
};
TORCH_MODULE(VideoDiscriminator);

// Image patch discriminator conditioned on the label map; stands in for the
// segmentation discriminator when the OASIS objective is disabled.
class ConditionalPatchDiscriminatorImpl : public torch::nn::Module {
public:
    ConditionalPatchDiscriminatorImpl(int64_t num_classes, int64_t levels, int64_t base_channels, int64_t channel_cap,
                                      bool spectral);

    // image: [B, 3, H, W]; labels: [B, H, W].
    DiscOutput forward(const torch::Tensor& image, const torch::Tensor& labels);

private:
    int64_t num_classes_;
    PatchDiscriminator net{nullptr};
};
TORCH_MODULE(ConditionalPatchDiscriminator);

struct Window {
    std::vector<int64_t> indices;
};

// All maximal windows [t, t + rate, ..., t + (K-1) rate] inside [0, length).
std::vector<Window> extract_windows(int64_t length, int64_t rate, int64_t frames_per_window);

// Stacks the selected windows of a [T, ...] tensor into [num_windows, K, ...].
torch::Tensor gather_windows(const torch::Tensor& sequence, const std::vector<Window>& windows);

}  // namespace svs::disc

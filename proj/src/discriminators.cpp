#include "svs/discriminators.hpp"

#include <string>

#include "svs/error.hpp"

namespace svs::disc {
using nn::lrelu;
using nn::upsample2;

void validate(const DiscIConfig& c) {
    if (c.num_classes < 2) throw ConfigError("D_I: num_classes must be >= 2");
    if (c.levels < 1) throw ConfigError("D_I: levels must be >= 1");
    if (c.base_channels < 1 || c.channel_cap < c.base_channels) throw ConfigError("D_I: invalid channel widths");
}

void validate(const DiscVConfig& c) {
    if (c.num_classes < 2) throw ConfigError("D_V: num_classes must be >= 2");
    if (c.frames_per_window < 2) throw ConfigError("D_V: frames_per_window must be >= 2");
    if (c.temporal_rates.empty()) throw ConfigError("D_V: at least one temporal rate is required");
    for (size_t i = 0; i < c.temporal_rates.size(); ++i) {
        if (c.temporal_rates[i] < 1 || (i > 0 && c.temporal_rates[i] <= c.temporal_rates[i - 1])) {
            throw ConfigError("D_V: temporal rates must be strictly increasing positive integers");
        }
    }
    if (c.patch_levels < 1) throw ConfigError("D_V: patch_levels must be >= 1");
    if (c.base_channels < 1 || c.channel_cap < c.base_channels) throw ConfigError("D_V: invalid channel widths");
}

namespace {

int64_t width_at(int64_t base, int64_t cap, int64_t level) { return std::min(base << level, cap); }

void check_divisible(const torch::Tensor& x, int64_t levels, const char* who) {
    const auto unit = int64_t{1} << levels;
    if (x.size(-1) % unit != 0 || x.size(-2) % unit != 0) {
        throw ConfigError(std::string(who) + ": input dims must be divisible by " + std::to_string(unit));
    }
}

}  // namespace

SegmentationDiscriminatorImpl::SegmentationDiscriminatorImpl(DiscIConfig config) : config_(config) {
    validate(config_);
    const auto& c = config_;
    int64_t in = 3;
    for (int64_t l = 1; l <= c.levels; ++l) {
        const auto out = width_at(c.base_channels, c.channel_cap, l - 1);
        down.push_back(register_module("down_" + std::to_string(l), nn::Conv(in, out, 3, 2, c.spectral_norm)));
        in = out;
    }
    // Decoder stage l produces resolution H / 2^(l-1); skips come from encoder stage l-1.
    for (int64_t l = c.levels; l >= 1; --l) {
        const auto skip = l >= 2 ? width_at(c.base_channels, c.channel_cap, l - 2) : 0;
        const auto out = width_at(c.base_channels, c.channel_cap, std::max<int64_t>(l - 2, 0));
        up.push_back(register_module("up_" + std::to_string(l), nn::Conv(in + skip, out, 3, 1, c.spectral_norm)));
        in = out;
    }
    head = register_module("head", nn::Conv(in, c.output_channels(), 1, 1, c.spectral_norm));
}

DiscOutput SegmentationDiscriminatorImpl::forward(const torch::Tensor& image) {
    if (image.dim() != 4 || image.size(1) != 3) throw ConfigError("D_I: input must be [B, 3, H, W]");
    check_divisible(image, config_.levels, "D_I");
    DiscOutput out;
    std::vector<torch::Tensor> skips;
    auto x = image;
    for (auto& conv : down) {
        x = lrelu(conv->forward(x));
        skips.push_back(x);
        out.features.push_back(x);
    }
    for (size_t i = 0; i < up.size(); ++i) {
        x = upsample2(x);
        const auto skip_index = static_cast<int64_t>(skips.size()) - 2 - static_cast<int64_t>(i);
        if (skip_index >= 0) x = torch::cat({x, skips[static_cast<size_t>(skip_index)]}, 1);
        x = lrelu(up[i]->forward(x));
        out.features.push_back(x);
    }
    out.logits.push_back(head->forward(x));
    return out;
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int64_t in_channels, int64_t levels, int64_t base_channels,
                                               int64_t channel_cap, bool spectral)
    : in_channels_(in_channels) {
    if (levels < 1) throw ConfigError("patch discriminator needs at least one level");
    int64_t in = in_channels;
    for (int64_t l = 1; l <= levels; ++l) {
        const auto out = width_at(base_channels, channel_cap, l - 1);
        stages.push_back(register_module("stage_" + std::to_string(l), nn::Conv(in, out, 3, 2, spectral)));
        heads.push_back(register_module("head_" + std::to_string(l), nn::Conv(out, 1, 1, 1, spectral)));
        in = out;
    }
}

DiscOutput PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != in_channels_) {
        throw DimensionError("patch discriminator expects " + std::to_string(in_channels_) + " input channels");
    }
    check_divisible(x, levels(), "patch discriminator");
    DiscOutput out;
    auto h = x;
    for (size_t i = 0; i < stages.size(); ++i) {
        h = lrelu(stages[i]->forward(h));
        out.features.push_back(h);
        out.logits.push_back(heads[i]->forward(h));
    }
    return out;
}

VideoDiscriminatorImpl::VideoDiscriminatorImpl(DiscVConfig config, int64_t rate) : config_(std::move(config)), rate_(rate) {
    validate(config_);
    if (rate < 1) throw ConfigError("D_V: rate must be >= 1");
    const auto k = config_.frames_per_window;
    net = register_module("net", PatchDiscriminator(k * (3 + config_.num_classes), config_.patch_levels,
                                                    config_.base_channels, config_.channel_cap, config_.spectral_norm));
}

DiscOutput VideoDiscriminatorImpl::forward(const torch::Tensor& clip, const torch::Tensor& labels) {
    const auto k = config_.frames_per_window;
    if (clip.dim() != 5 || clip.size(2) != 3) throw DimensionError("D_V: clip must be [B, K, 3, H, W]");
    if (clip.size(1) != k) {
        throw ValidationError("D_V: expected " + std::to_string(k) + " frames per clip, got " + std::to_string(clip.size(1)));
    }
    if (labels.dim() != 4 || labels.size(0) != clip.size(0) || labels.size(1) != k || labels.size(2) != clip.size(3) ||
        labels.size(3) != clip.size(4)) {
        throw DimensionError("D_V: labels must be [B, K, H, W] matching the clip");
    }
    const auto b = clip.size(0);
    const auto h = clip.size(3);
    const auto w = clip.size(4);
    const auto frames = clip.reshape({b, k * 3, h, w});
    const auto maps = nn::one_hot(labels.reshape({b * k, h, w}), config_.num_classes, clip.scalar_type())
                          .reshape({b, k * config_.num_classes, h, w});
    return net->forward(torch::cat({frames, maps}, 1));
}

ConditionalPatchDiscriminatorImpl::ConditionalPatchDiscriminatorImpl(int64_t num_classes, int64_t levels,
                                                                     int64_t base_channels, int64_t channel_cap,
                                                                     bool spectral)
    : num_classes_(num_classes) {
    net = register_module("net", PatchDiscriminator(3 + num_classes, levels, base_channels, channel_cap, spectral));
}

DiscOutput ConditionalPatchDiscriminatorImpl::forward(const torch::Tensor& image, const torch::Tensor& labels) {
    if (image.dim() != 4 || image.size(1) != 3) throw DimensionError("patch D: image must be [B, 3, H, W]");
    return net->forward(torch::cat({image, nn::one_hot(labels, num_classes_, image.scalar_type())}, 1));
}

std::vector<Window> extract_windows(int64_t length, int64_t rate, int64_t frames_per_window) {
    if (rate < 1 || frames_per_window < 1) throw ValidationError("extract_windows: rate and K must be >= 1");
    const auto span = (frames_per_window - 1) * rate;
    if (length < 1 + span) {
        throw ValidationError("extract_windows: sequence of " + std::to_string(length) + " frames is shorter than 1 + (K-1)*rate");
    }
    std::vector<Window> windows;
    for (int64_t t = 0; t + span < length; ++t) {
        Window w;
        for (int64_t j = 0; j < frames_per_window; ++j) w.indices.push_back(t + j * rate);
        windows.push_back(std::move(w));
    }
    return windows;
}

torch::Tensor gather_windows(const torch::Tensor& sequence, const std::vector<Window>& windows) {
    std::vector<torch::Tensor> clips;
    clips.reserve(windows.size());
    for (const auto& w : windows) {
        const auto index = torch::tensor(w.indices, torch::kLong);
        clips.push_back(sequence.index_select(0, index));
    }
    return torch::stack(clips);
}

}  // namespace svs::disc

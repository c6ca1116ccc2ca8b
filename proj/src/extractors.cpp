#include "svs/extractors.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "svs/error.hpp"
#include "svs/layers.hpp"

namespace svs::nn {
namespace F = torch::nn::functional;

FrozenConvStackImpl::FrozenConvStackImpl(std::uint64_t seed, int64_t in_channels, std::vector<int64_t> widths,
                                         std::vector<int64_t> strides, bool volumetric)
    : strides_(std::move(strides)), volumetric_(volumetric) {
    if (widths.size() != strides_.size() || widths.empty()) throw ConfigError("frozen stack: widths/strides mismatch");
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    int64_t in = in_channels;
    for (size_t i = 0; i < widths.size(); ++i) {
        std::vector<int64_t> shape{widths[i], in, 3, 3};
        if (volumetric_) shape.push_back(3);
        const double fan_in = static_cast<double>(in * 9 * (volumetric_ ? 3 : 1));
        auto w = torch::randn(shape, gen, torch::kFloat32) * std::sqrt(2.0 / fan_in);
        weights_.push_back(register_buffer("weight_" + std::to_string(i), w));
        in = widths[i];
    }
}

std::vector<torch::Tensor> FrozenConvStackImpl::forward(const torch::Tensor& x) {
    std::vector<torch::Tensor> features;
    auto h = x;
    for (size_t i = 0; i < weights_.size(); ++i) {
        const auto w = weights_[i].to(h.dtype());
        const auto s = strides_[i];
        if (volumetric_) {
            h = F::conv3d(h, w, F::Conv3dFuncOptions().stride({1, s, s}).padding(1));
        } else {
            h = F::conv2d(h, w, F::Conv2dFuncOptions().stride(s).padding(1));
        }
        h = lrelu(h);
        features.push_back(h);
    }
    return features;
}

FrozenConvStack make_perceptual_extractor(std::uint64_t seed) {
    return FrozenConvStack(seed, 3, std::vector<int64_t>{16, 32, 64, 64, 64}, std::vector<int64_t>{1, 2, 2, 2, 2});
}

FrozenConvStack make_frame_extractor(std::uint64_t seed) {
    return FrozenConvStack(seed, 3, std::vector<int64_t>{16, 32, 64, 64}, std::vector<int64_t>{1, 2, 2, 2});
}

torch::Tensor frame_embedding(FrozenConvStack& extractor, const torch::Tensor& frames) {
    if (frames.dim() != 4 || frames.size(1) != 3) throw DimensionError("frame embedding expects [B, 3, H, W]");
    torch::NoGradGuard guard;
    const auto features = extractor->forward(frames);
    const auto n = features.size();
    return torch::cat({features[n - 2].mean({2, 3}), features[n - 1].mean({2, 3})}, 1);
}

FrozenConvStack make_clip_extractor(std::uint64_t seed) {
    return FrozenConvStack(seed, 3, std::vector<int64_t>{16, 32, 64, 64}, std::vector<int64_t>{1, 2, 2, 2},
                           /*volumetric=*/true);
}

torch::Tensor clip_embedding(FrozenConvStack& extractor, const torch::Tensor& clips) {
    if (clips.dim() != 5 || clips.size(2) != 3) throw DimensionError("clip embedding expects [B, K, 3, H, W]");
    torch::NoGradGuard guard;
    const auto features = extractor->forward(clips.permute({0, 2, 1, 3, 4}).contiguous());
    const auto n = features.size();
    return torch::cat({features[n - 2].mean({2, 3, 4}), features[n - 1].mean({2, 3, 4})}, 1);
}

}  // namespace svs::nn

#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace svs::nn {

// Frozen conv stack with fixed-seed He-normal weights and zero biases. Used
// where pretrained backbones would normally sit: perceptual loss, FID and FVD
// embeddings. Stage outputs are returned shallow to deep.
class FrozenConvStackImpl : public torch::nn::Module {
public:
    // volumetric=true builds 3-D convs over [B, C, T, H, W] with spatial-only striding.
    FrozenConvStackImpl(std::uint64_t seed, int64_t in_channels, std::vector<int64_t> widths,
                        std::vector<int64_t> strides, bool volumetric = false);

    std::vector<torch::Tensor> forward(const torch::Tensor& x);
    int64_t stages() const { return static_cast<int64_t>(weights_.size()); }

private:
    std::vector<int64_t> strides_;
    bool volumetric_;
    std::vector<torch::Tensor> weights_;
};
TORCH_MODULE(FrozenConvStack);

// Five-stage 2-D stack for the perceptual loss.
FrozenConvStack make_perceptual_extractor(std::uint64_t seed);
// Frame embedding for FID: spatial means of the last two stages.
FrozenConvStack make_frame_extractor(std::uint64_t seed);
torch::Tensor frame_embedding(FrozenConvStack& extractor, const torch::Tensor& frames);
// Clip embedding for FVD over [B, K, 3, H, W] clips.
FrozenConvStack make_clip_extractor(std::uint64_t seed);
torch::Tensor clip_embedding(FrozenConvStack& extractor, const torch::Tensor& clips);

}  // namespace svs::nn

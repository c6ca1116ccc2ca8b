#pragma once

#include <torch/torch.h>

// Differentiable geometric kernels shared by the generator, the losses and the
// synthetic-data checks.
//
// Flow convention (backward warp): warped(x, y) = source(x + u(x, y), y + v(x, y)),
// channel 0 = u (horizontal), channel 1 = v (vertical), in pixels of the tensor
// being warped. Samples outside the image are clamped to the border.
namespace svs::warp {

// source: [B, C, H, W] or [C, H, W]; flow: [B, 2, H, W] or [2, H, W].
// Differentiable with respect to both source and flow.
torch::Tensor bilinear_warp(const torch::Tensor& source, const torch::Tensor& flow);

// out = occlusion * generated + (1 - occlusion) * warped. The occlusion map
// ([B, 1, H, W] or [1, H, W]) broadcasts over channels and must lie in [0, 1].
torch::Tensor fuse_occlusion(const torch::Tensor& generated, const torch::Tensor& warped,
                             const torch::Tensor& occlusion);

// Bilinear resize that rescales u by W'/W and v by H'/H.
torch::Tensor resize_flow(const torch::Tensor& flow, int64_t height, int64_t width);

// Bilinear resize of a [B, 1, H, W] map (used for per-level occlusion).
torch::Tensor resize_map(const torch::Tensor& map, int64_t height, int64_t width);

}  // namespace svs::warp

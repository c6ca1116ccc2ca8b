#pragma once

#include <torch/torch.h>

namespace svs::nn {

// 2-D convolution with "same" padding for odd kernels and optional spectral
// normalization (one power iteration per training-mode forward, persistent u).
class ConvImpl : public torch::nn::Module {
public:
    ConvImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride = 1, bool spectral = false,
             bool bias = true);

    torch::Tensor forward(const torch::Tensor& x);
    // Weight actually applied (divided by the spectral norm estimate when enabled).
    torch::Tensor effective_weight();

    int64_t in_channels() const { return in_; }
    int64_t out_channels() const { return out_; }

    torch::Tensor weight;
    torch::Tensor bias;

private:
    int64_t in_;
    int64_t out_;
    int64_t kernel_;
    int64_t stride_;
    bool spectral_;
    torch::Tensor u_;
};
TORCH_MODULE(Conv);

// Parameter-free per-channel normalization over batch and spatial dims.
torch::Tensor normalize_channels(const torch::Tensor& x, double eps = 1e-5);

// Spatially-adaptive normalization: (1 + gamma(seg)) * norm(x) + beta(seg),
// gamma/beta are 3x3 convs of a shared ReLU hidden conv of the semantic
// features. The modulation convs start at zero so the layer starts as plain
// normalization.
class SpadeImpl : public torch::nn::Module {
public:
    SpadeImpl(int64_t channels, int64_t semantic_channels, int64_t hidden);

    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& semantic);

    Conv shared{nullptr};
    Conv gamma{nullptr};
    Conv beta{nullptr};
};
TORCH_MODULE(Spade);

class SpadeResBlockImpl : public torch::nn::Module {
public:
    SpadeResBlockImpl(int64_t in_channels, int64_t out_channels, int64_t semantic_channels, int64_t hidden,
                      bool spectral);

    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& semantic);

private:
    Spade norm_0{nullptr};
    Spade norm_1{nullptr};
    Spade norm_s{nullptr};
    Conv conv_0{nullptr};
    Conv conv_1{nullptr};
    Conv conv_s{nullptr};
};
TORCH_MODULE(SpadeResBlock);

// Residual block with normalization and a learned per-channel affine instead
// of SPADE; the generator uses it when SPADE conditioning is switched off.
class NormResBlockImpl : public torch::nn::Module {
public:
    NormResBlockImpl(int64_t in_channels, int64_t out_channels, bool spectral);

    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::Tensor scale_0, shift_0, scale_1, shift_1;
    Conv conv_0{nullptr};
    Conv conv_1{nullptr};
    Conv conv_s{nullptr};
};
TORCH_MODULE(NormResBlock);

// x + conv(lrelu(conv(lrelu(x)))), no normalization.
class ResBlockImpl : public torch::nn::Module {
public:
    ResBlockImpl(int64_t channels, bool spectral);

    torch::Tensor forward(const torch::Tensor& x);

private:
    Conv conv_0{nullptr};
    Conv conv_1{nullptr};
};
TORCH_MODULE(ResBlock);

torch::Tensor lrelu(const torch::Tensor& x);
torch::Tensor upsample2(const torch::Tensor& x);

// One-hot encoding of [B, H, W] integer labels into [B, N, H, W] floats.
torch::Tensor one_hot(const torch::Tensor& labels, int64_t num_classes, torch::Dtype dtype = torch::kFloat32);

// Total number of parameter elements (buffers excluded).
int64_t param_count(const torch::nn::Module& module);

}  // namespace svs::nn

#include "svs/layers.hpp"

#include <cmath>

#include "svs/error.hpp"

namespace svs::nn {
namespace F = torch::nn::functional;

ConvImpl::ConvImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride, bool spectral, bool bias)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), spectral_(spectral) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || stride < 1) throw ConfigError("invalid conv geometry");
    weight = register_parameter("weight", torch::empty({out_channels, in_channels, kernel, kernel}));
    torch::nn::init::kaiming_uniform_(weight, std::sqrt(5.0));
    if (bias) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel * kernel));
        this->bias = register_parameter("bias", torch::empty({out_channels}).uniform_(-bound, bound));
    }
    if (spectral_) {
        u_ = register_buffer("u", F::normalize(torch::randn({out_channels}), F::NormalizeFuncOptions().dim(0)));
    }
}

torch::Tensor ConvImpl::effective_weight() {
    if (!spectral_) return weight;
    const auto w = weight.reshape({out_, -1});
    torch::Tensor u;
    torch::Tensor v;
    {
        torch::NoGradGuard guard;
        u = u_.to(w.dtype());
        v = F::normalize(torch::mv(w.t(), u), F::NormalizeFuncOptions().dim(0).eps(1e-12));
        if (is_training()) {
            u = F::normalize(torch::mv(w, v), F::NormalizeFuncOptions().dim(0).eps(1e-12));
            u_.copy_(u);
        }
    }
    const auto sigma = torch::dot(u, torch::mv(w, v));
    return weight / sigma;
}

torch::Tensor ConvImpl::forward(const torch::Tensor& x) {
    if (x.size(1) != in_) throw DimensionError("conv expects " + std::to_string(in_) + " input channels");
    return F::conv2d(x, effective_weight(),
                     F::Conv2dFuncOptions().bias(bias).stride(stride_).padding(kernel_ / 2));
}

torch::Tensor normalize_channels(const torch::Tensor& x, double eps) {
    const auto mean = x.mean({0, 2, 3}, /*keepdim=*/true);
    const auto var = (x - mean).pow(2).mean({0, 2, 3}, /*keepdim=*/true);
    return (x - mean) / torch::sqrt(var + eps);
}

SpadeImpl::SpadeImpl(int64_t channels, int64_t semantic_channels, int64_t hidden) {
    shared = register_module("shared", Conv(semantic_channels, hidden, 3));
    gamma = register_module("gamma", Conv(hidden, channels, 3));
    beta = register_module("beta", Conv(hidden, channels, 3));
    torch::NoGradGuard guard;
    for (auto* conv : {gamma.get(), beta.get()}) {
        conv->weight.zero_();
        conv->bias.zero_();
    }
}

torch::Tensor SpadeImpl::forward(const torch::Tensor& x, const torch::Tensor& semantic) {
    if (x.dim() != 4 || semantic.dim() != 4 || x.size(0) != semantic.size(0) || x.size(2) != semantic.size(2) ||
        x.size(3) != semantic.size(3)) {
        throw DimensionError("SPADE: features and semantic features must share batch and spatial dims");
    }
    const auto hidden = torch::relu(shared->forward(semantic));
    return (1 + gamma->forward(hidden)) * normalize_channels(x) + beta->forward(hidden);
}

SpadeResBlockImpl::SpadeResBlockImpl(int64_t in_channels, int64_t out_channels, int64_t semantic_channels,
                                     int64_t hidden, bool spectral) {
    const auto mid = std::min(in_channels, out_channels);
    norm_0 = register_module("norm_0", Spade(in_channels, semantic_channels, hidden));
    conv_0 = register_module("conv_0", Conv(in_channels, mid, 3, 1, spectral));
    norm_1 = register_module("norm_1", Spade(mid, semantic_channels, hidden));
    conv_1 = register_module("conv_1", Conv(mid, out_channels, 3, 1, spectral));
    if (in_channels != out_channels) {
        norm_s = register_module("norm_s", Spade(in_channels, semantic_channels, hidden));
        conv_s = register_module("conv_s", Conv(in_channels, out_channels, 1, 1, spectral, /*bias=*/false));
    }
}

torch::Tensor SpadeResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& semantic) {
    const auto shortcut = conv_s ? conv_s->forward(norm_s->forward(x, semantic)) : x;
    auto dx = conv_0->forward(lrelu(norm_0->forward(x, semantic)));
    dx = conv_1->forward(lrelu(norm_1->forward(dx, semantic)));
    return shortcut + dx;
}

NormResBlockImpl::NormResBlockImpl(int64_t in_channels, int64_t out_channels, bool spectral) {
    const auto mid = std::min(in_channels, out_channels);
    scale_0 = register_parameter("scale_0", torch::ones({1, in_channels, 1, 1}));
    shift_0 = register_parameter("shift_0", torch::zeros({1, in_channels, 1, 1}));
    conv_0 = register_module("conv_0", Conv(in_channels, mid, 3, 1, spectral));
    scale_1 = register_parameter("scale_1", torch::ones({1, mid, 1, 1}));
    shift_1 = register_parameter("shift_1", torch::zeros({1, mid, 1, 1}));
    conv_1 = register_module("conv_1", Conv(mid, out_channels, 3, 1, spectral));
    if (in_channels != out_channels) {
        conv_s = register_module("conv_s", Conv(in_channels, out_channels, 1, 1, spectral, /*bias=*/false));
    }
}

torch::Tensor NormResBlockImpl::forward(const torch::Tensor& x) {
    const auto shortcut = conv_s ? conv_s->forward(x) : x;
    auto dx = conv_0->forward(lrelu(scale_0 * normalize_channels(x) + shift_0));
    dx = conv_1->forward(lrelu(scale_1 * normalize_channels(dx) + shift_1));
    return shortcut + dx;
}

ResBlockImpl::ResBlockImpl(int64_t channels, bool spectral) {
    conv_0 = register_module("conv_0", Conv(channels, channels, 3, 1, spectral));
    conv_1 = register_module("conv_1", Conv(channels, channels, 3, 1, spectral));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
    return x + conv_1->forward(lrelu(conv_0->forward(lrelu(x))));
}

torch::Tensor lrelu(const torch::Tensor& x) { return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2)); }

torch::Tensor upsample2(const torch::Tensor& x) {
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{2 * x.size(2), 2 * x.size(3)})
                                 .mode(torch::kNearest));
}

torch::Tensor one_hot(const torch::Tensor& labels, int64_t num_classes, torch::Dtype dtype) {
    if (labels.dim() != 3) throw DimensionError("one_hot expects [B, H, W] labels");
    return F::one_hot(labels.to(torch::kLong), num_classes).permute({0, 3, 1, 2}).to(dtype).contiguous();
}

int64_t param_count(const torch::nn::Module& module) {
    int64_t total = 0;
    for (const auto& p : module.parameters()) total += p.numel();
    return total;
}

}  // namespace svs::nn

#include "svs/warp.hpp"

#include "svs/error.hpp"

namespace svs::warp {
namespace F = torch::nn::functional;

namespace {

torch::Tensor as_batch(const torch::Tensor& t) { return t.dim() == 3 ? t.unsqueeze(0) : t; }

std::string shape_str(const torch::Tensor& t) {
    std::ostringstream os;
    os << t.sizes();
    return os.str();
}

}  // namespace

torch::Tensor bilinear_warp(const torch::Tensor& source, const torch::Tensor& flow) {
    if (source.dim() != flow.dim() || (source.dim() != 3 && source.dim() != 4)) {
        throw DimensionError("bilinear_warp expects matching [C,H,W]/[B,C,H,W] source and flow ranks");
    }
    const auto src = as_batch(source);
    const auto flw = as_batch(flow);
    const auto batch = src.size(0);
    const auto channels = src.size(1);
    const auto height = src.size(2);
    const auto width = src.size(3);
    if (flw.size(0) != batch || flw.size(1) != 2 || flw.size(2) != height || flw.size(3) != width) {
        throw DimensionError("flow " + shape_str(flow) + " does not match source " + shape_str(source));
    }
    if (!torch::isfinite(flw).all().item<bool>()) throw ValidationError("bilinear_warp: flow contains non-finite values");

    const auto opts = flw.options().requires_grad(false);
    const auto base_x = torch::arange(width, opts).view({1, 1, width});
    const auto base_y = torch::arange(height, opts).view({1, height, 1});
    const auto sx = (base_x + flw.select(1, 0)).clamp(0.0, static_cast<double>(width - 1));
    const auto sy = (base_y + flw.select(1, 1)).clamp(0.0, static_cast<double>(height - 1));

    const auto x0 = sx.detach().floor();
    const auto y0 = sy.detach().floor();
    const auto wx = (sx - x0).unsqueeze(1);
    const auto wy = (sy - y0).unsqueeze(1);

    const auto x0i = x0.to(torch::kLong);
    const auto y0i = y0.to(torch::kLong);
    const auto x1i = (x0i + 1).clamp_max(width - 1);
    const auto y1i = (y0i + 1).clamp_max(height - 1);

    const auto flat = src.reshape({batch, channels, height * width});
    auto tap = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
        const auto index = (yi * width + xi).reshape({batch, 1, height * width}).expand({batch, channels, height * width});
        return flat.gather(2, index).view({batch, channels, height, width});
    };

    auto out = tap(y0i, x0i) * ((1 - wx) * (1 - wy)) + tap(y0i, x1i) * (wx * (1 - wy)) +
               tap(y1i, x0i) * ((1 - wx) * wy) + tap(y1i, x1i) * (wx * wy);
    return source.dim() == 3 ? out.squeeze(0) : out;
}

torch::Tensor fuse_occlusion(const torch::Tensor& generated, const torch::Tensor& warped, const torch::Tensor& occlusion) {
    if (generated.sizes() != warped.sizes()) {
        throw DimensionError("fuse_occlusion: generated " + shape_str(generated) + " vs warped " + shape_str(warped));
    }
    if (occlusion.dim() != generated.dim() || occlusion.size(-3) != 1 || occlusion.size(-1) != generated.size(-1) ||
        occlusion.size(-2) != generated.size(-2) || (generated.dim() == 4 && occlusion.size(0) != generated.size(0))) {
        throw DimensionError("fuse_occlusion: occlusion " + shape_str(occlusion) + " does not match " + shape_str(generated));
    }
    {
        torch::NoGradGuard guard;
        if (occlusion.numel() > 0 && (occlusion.min().item<double>() < 0.0 || occlusion.max().item<double>() > 1.0)) {
            throw ValidationError("fuse_occlusion: occlusion values must lie in [0, 1]");
        }
    }
    return occlusion * generated + (1 - occlusion) * warped;
}

torch::Tensor resize_flow(const torch::Tensor& flow, int64_t height, int64_t width) {
    if (height < 1 || width < 1) throw ValidationError("resize_flow: target dimensions must be >= 1");
    const auto f = as_batch(flow);
    if (f.size(1) != 2) throw DimensionError("resize_flow expects 2 flow channels");
    const auto src_h = f.size(2);
    const auto src_w = f.size(3);
    torch::Tensor out;
    if (src_h == height && src_w == width) {
        out = f.clone();
    } else {
        const auto resized = F::interpolate(
            f, F::InterpolateFuncOptions().size(std::vector<int64_t>{height, width}).mode(torch::kBilinear).align_corners(false));
        const auto scale = torch::tensor({static_cast<double>(width) / static_cast<double>(src_w),
                                          static_cast<double>(height) / static_cast<double>(src_h)},
                                         f.options().requires_grad(false))
                               .view({1, 2, 1, 1});
        out = resized * scale;
    }
    return flow.dim() == 3 ? out.squeeze(0) : out;
}

torch::Tensor resize_map(const torch::Tensor& map, int64_t height, int64_t width) {
    const auto m = as_batch(map);
    if (m.size(2) == height && m.size(3) == width) return map;
    auto out = F::interpolate(
        m, F::InterpolateFuncOptions().size(std::vector<int64_t>{height, width}).mode(torch::kBilinear).align_corners(false));
    return map.dim() == 3 ? out.squeeze(0) : out;
}

}  // namespace svs::warp

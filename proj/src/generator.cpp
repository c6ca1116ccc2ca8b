#include "svs/generator.hpp"

#include <string>

#include "svs/error.hpp"
#include "svs/warp.hpp"

namespace svs::gen {
namespace F = torch::nn::functional;
using nn::lrelu;
using nn::upsample2;

int64_t GeneratorConfig::channels_at(int64_t level) const {
    return std::min(base_channels << level, channel_cap);
}

int64_t GeneratorConfig::grown_channels(int64_t g) const { return std::max<int64_t>(4, base_channels >> g); }

void validate(const GeneratorConfig& c) {
    if (c.num_classes < 2) throw ConfigError("generator: num_classes must be >= 2");
    if (c.levels < 2) throw ConfigError("generator: levels must be >= 2");
    if (c.base_channels < 4) throw ConfigError("generator: base_channels must be >= 4");
    if (c.channel_cap < c.base_channels) throw ConfigError("generator: channel_cap must be >= base_channels");
    if (c.flow_net_blocks < 0 || c.noise_dim < 0 || c.growth_levels < 0) {
        throw ConfigError("generator: counts must be non-negative");
    }
    if (c.spade_hidden < 1) throw ConfigError("generator: spade_hidden must be >= 1");
}

namespace {

int64_t flow_width(const GeneratorConfig& c, int64_t level) { return std::max<int64_t>(4, c.channels_at(level) / 2); }

torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width) {
    if (x.size(2) == height && x.size(3) == width) return x;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{height, width})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

}  // namespace

GeneratorImpl::GeneratorImpl(GeneratorConfig config) : config_(config) {
    validate(config_);
    const auto& c = config_;
    const auto levels = c.levels;
    const bool sn = c.spectral_norm;

    flow_stem = register_module("flow_stem", nn::Conv(2 * c.num_classes, flow_width(c, 0), 3, 1, sn));
    for (int64_t l = 1; l <= levels; ++l) {
        flow_down.push_back(register_module("flow_down_" + std::to_string(l),
                                            nn::Conv(flow_width(c, l - 1), flow_width(c, l), 3, 2, sn)));
    }
    for (int64_t i = 0; i < c.flow_net_blocks; ++i) {
        flow_res.push_back(register_module("flow_res_" + std::to_string(i), nn::ResBlock(flow_width(c, levels), sn)));
    }
    for (int64_t l = levels; l >= 1; --l) {
        flow_up.push_back(register_module("flow_up_" + std::to_string(l),
                                          nn::Conv(flow_width(c, l), flow_width(c, l - 1), 3, 1, sn)));
    }
    flow_head = register_module("flow_head", nn::Conv(flow_width(c, 0), 2, 3));
    occ_head = register_module("occ_head", nn::Conv(flow_width(c, 0), 1, 3));

    const int64_t image_in = c.use_spade ? 3 : 3 + c.num_classes;
    img_stem = register_module("img_stem", nn::Conv(image_in, c.channels_at(0), 3, 1, sn));
    for (int64_t l = 1; l <= levels; ++l) {
        img_down.push_back(register_module("img_down_" + std::to_string(l),
                                           nn::Conv(c.channels_at(l - 1), c.channels_at(l), 3, 2, sn)));
    }

    if (c.use_spade) {
        sem_stem = register_module("sem_stem", nn::Conv(c.num_classes, c.channels_at(0), 3, 1, sn));
        for (int64_t l = 1; l <= levels; ++l) {
            sem_down.push_back(register_module("sem_down_" + std::to_string(l),
                                               nn::Conv(c.channels_at(l - 1), c.channels_at(l), 3, 2, sn)));
        }
        const auto bottleneck = c.channels_at(levels);
        dec_start = register_module("dec_start", nn::Conv(bottleneck + c.noise_dim, bottleneck, 3, 1, sn));
        for (int64_t l = levels; l >= 0; --l) {
            const auto semantic_ch = l == levels ? bottleneck : c.channels_at(l) + bottleneck;
            const auto out_ch = c.channels_at(std::max<int64_t>(l - 1, 0));
            dec_blocks.push_back(register_module(
                "dec_block_" + std::to_string(l),
                nn::SpadeResBlock(c.channels_at(l), out_ch, semantic_ch, c.spade_hidden, sn)));
        }
    } else {
        for (int64_t l = levels; l >= 0; --l) {
            plain_blocks.push_back(register_module(
                "dec_block_" + std::to_string(l),
                nn::NormResBlock(c.channels_at(l), c.channels_at(std::max<int64_t>(l - 1, 0)), sn)));
        }
    }
    out_head = register_module("out_head", nn::Conv(c.channels_at(0), 3, 3));

    for (int64_t g = 1; g <= c.growth_levels; ++g) add_grown_level(g);
}

void GeneratorImpl::add_grown_level(int64_t g) {
    const auto& c = config_;
    const bool sn = c.spectral_norm;
    const auto incoming = g == 1 ? c.channels_at(0) : c.grown_channels(g - 1);
    const auto width = c.grown_channels(g);
    const auto tag = std::to_string(g);
    grown_img_stem.push_back(register_module("grown_img_stem_" + tag, nn::Conv(c.use_spade ? 3 : 3 + c.num_classes, incoming, 3, 1, sn)));
    if (c.use_spade) {
        grown_sem_stem.push_back(register_module("grown_sem_stem_" + tag, nn::Conv(c.num_classes, width, 3, 1, sn)));
        grown_blocks.push_back(register_module(
            "grown_block_" + tag,
            nn::SpadeResBlock(incoming, width, width + c.channels_at(c.levels), c.spade_hidden, sn)));
    } else {
        grown_plain_blocks.push_back(register_module("grown_block_" + tag, nn::NormResBlock(incoming, width, sn)));
    }
    grown_heads.push_back(register_module("grown_head_" + tag, nn::Conv(width, 3, 3)));
}

void GeneratorImpl::grow() {
    config_.growth_levels += 1;
    add_grown_level(config_.growth_levels);
}

void GeneratorImpl::check_input(const torch::Tensor& x, int64_t channels, const char* what) const {
    if (x.dim() != 4 || x.size(1) != channels) {
        throw DimensionError(std::string("generator: ") + what + " must be [B, " + std::to_string(channels) + ", H, W]");
    }
    const auto unit = config_.size_unit();
    if (x.size(2) % unit != 0 || x.size(3) % unit != 0) {
        throw ConfigError(std::string("generator: ") + what + " dims must be divisible by " + std::to_string(unit));
    }
}

torch::Tensor GeneratorImpl::pool_to_base(const torch::Tensor& x) const {
    const auto factor = int64_t{1} << config_.growth_levels;
    if (factor == 1) return x;
    return F::avg_pool2d(x, F::AvgPool2dFuncOptions(factor).stride(factor));
}

std::pair<torch::Tensor, torch::Tensor> GeneratorImpl::predict_flow(const torch::Tensor& s_prev,
                                                                    const torch::Tensor& s_cur) {
    check_input(s_prev, config_.num_classes, "s_prev");
    check_input(s_cur, config_.num_classes, "s_cur");
    if (s_prev.sizes() != s_cur.sizes()) throw DimensionError("generator: s_prev and s_cur shapes differ");
    const auto height = s_cur.size(2);
    const auto width = s_cur.size(3);

    std::vector<torch::Tensor> skips;
    auto x = lrelu(flow_stem->forward(pool_to_base(torch::cat({s_prev, s_cur}, 1))));
    skips.push_back(x);
    for (auto& down : flow_down) {
        x = lrelu(down->forward(x));
        skips.push_back(x);
    }
    for (auto& block : flow_res) x = block->forward(x);
    for (size_t i = 0; i < flow_up.size(); ++i) {
        x = lrelu(flow_up[i]->forward(upsample2(x))) + skips[skips.size() - 2 - i];
    }
    auto flow = flow_head->forward(x);
    auto occlusion = torch::sigmoid(occ_head->forward(x));
    if (config_.growth_levels > 0) {
        flow = warp::resize_flow(flow, height, width);
        occlusion = warp::resize_map(occlusion, height, width);
    }
    return {flow, occlusion};
}

std::vector<torch::Tensor> GeneratorImpl::encode_warped_image(const torch::Tensor& warped) {
    const auto expected = config_.use_spade ? 3 : 3 + config_.num_classes;
    check_input(warped, expected, "image encoder input");
    const auto grown = config_.growth_levels;
    std::vector<torch::Tensor> pyramid(static_cast<size_t>(grown + config_.levels + 1));
    auto x = lrelu(img_stem->forward(pool_to_base(warped)));
    pyramid[static_cast<size_t>(grown)] = x;
    for (int64_t l = 1; l <= config_.levels; ++l) {
        x = lrelu(img_down[static_cast<size_t>(l - 1)]->forward(x));
        pyramid[static_cast<size_t>(grown + l)] = x;
    }
    for (int64_t g = 1; g <= grown; ++g) {
        const auto factor = int64_t{1} << (grown - g);
        const auto input = factor == 1 ? warped : F::avg_pool2d(warped, F::AvgPool2dFuncOptions(factor).stride(factor));
        pyramid[static_cast<size_t>(grown - g)] = lrelu(grown_img_stem[static_cast<size_t>(g - 1)]->forward(input));
    }
    return pyramid;
}

std::vector<torch::Tensor> GeneratorImpl::encode_semantics(const torch::Tensor& s_cur) {
    if (!config_.use_spade) throw ConfigError("generator: the semantic encoder is disabled without SPADE");
    check_input(s_cur, config_.num_classes, "s_cur");
    const auto grown = config_.growth_levels;
    const auto levels = config_.levels;
    std::vector<torch::Tensor> raw;
    auto x = lrelu(sem_stem->forward(pool_to_base(s_cur)));
    raw.push_back(x);
    for (auto& down : sem_down) {
        x = lrelu(down->forward(x));
        raw.push_back(x);
    }
    const auto& bottleneck = raw.back();
    std::vector<torch::Tensor> pyramid(static_cast<size_t>(grown + levels + 1));
    for (int64_t l = 0; l <= levels; ++l) {
        const auto& f = raw[static_cast<size_t>(l)];
        pyramid[static_cast<size_t>(grown + l)] =
            l == levels ? f : torch::cat({f, upsample_to(bottleneck, f.size(2), f.size(3))}, 1);
    }
    for (int64_t g = 1; g <= grown; ++g) {
        const auto factor = int64_t{1} << (grown - g);
        const auto input = factor == 1 ? s_cur : F::avg_pool2d(s_cur, F::AvgPool2dFuncOptions(factor).stride(factor));
        const auto f = lrelu(grown_sem_stem[static_cast<size_t>(g - 1)]->forward(input));
        pyramid[static_cast<size_t>(grown - g)] = torch::cat({f, upsample_to(bottleneck, f.size(2), f.size(3))}, 1);
    }
    return pyramid;
}

torch::Tensor GeneratorImpl::decode_frame(const std::vector<torch::Tensor>& semantic_pyramid,
                                          const std::vector<torch::Tensor>& image_pyramid,
                                          const torch::Tensor& occlusion, const std::optional<torch::Tensor>& noise) {
    const auto grown = config_.growth_levels;
    const auto levels = config_.levels;
    const auto depth = static_cast<size_t>(grown + levels + 1);
    if (image_pyramid.size() != depth || (config_.use_spade && semantic_pyramid.size() != depth)) {
        throw ConfigError("generator: pyramid depth does not match the configuration");
    }
    auto level_occ = [&](const torch::Tensor& like) { return warp::resize_map(occlusion, like.size(2), like.size(3)); };

    torch::Tensor d;
    if (config_.use_spade) {
        auto start = semantic_pyramid[static_cast<size_t>(grown + levels)];
        if (config_.noise_dim > 0) {
            auto z = noise.has_value() ? *noise
                                       : torch::zeros({start.size(0), config_.noise_dim}, start.options());
            if (z.dim() != 2 || z.size(1) != config_.noise_dim) throw DimensionError("generator: noise must be [B, noise_dim]");
            start = torch::cat({start, z.view({z.size(0), z.size(1), 1, 1}).expand({-1, -1, start.size(2), start.size(3)})}, 1);
        }
        d = dec_start->forward(start);
        for (int64_t l = levels; l >= 0; --l) {
            const auto idx = static_cast<size_t>(grown + l);
            d = warp::fuse_occlusion(d, image_pyramid[idx], level_occ(d));
            d = dec_blocks[static_cast<size_t>(levels - l)]->forward(d, semantic_pyramid[idx]);
            if (l > 0) d = upsample2(d);
        }
        for (int64_t g = 1; g <= grown; ++g) {
            const auto idx = static_cast<size_t>(grown - g);
            d = upsample2(d);
            d = warp::fuse_occlusion(d, image_pyramid[idx], level_occ(d));
            d = grown_blocks[static_cast<size_t>(g - 1)]->forward(d, semantic_pyramid[idx]);
        }
    } else {
        d = image_pyramid[static_cast<size_t>(grown + levels)];
        for (int64_t l = levels; l >= 0; --l) {
            if (l < levels) d = d + image_pyramid[static_cast<size_t>(grown + l)];
            d = plain_blocks[static_cast<size_t>(levels - l)]->forward(d);
            if (l > 0) d = upsample2(d);
        }
        for (int64_t g = 1; g <= grown; ++g) {
            d = upsample2(d) + image_pyramid[static_cast<size_t>(grown - g)];
            d = grown_plain_blocks[static_cast<size_t>(g - 1)]->forward(d);
        }
    }
    auto& head = grown == 0 ? out_head : grown_heads.back();
    return torch::tanh(head->forward(lrelu(d)));
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& x_prev, const torch::Tensor& s_prev,
                                       const torch::Tensor& s_cur, const std::optional<torch::Tensor>& noise) {
    check_input(x_prev, 3, "x_prev");
    if (s_prev.dim() != 3 || s_cur.dim() != 3 || s_prev.sizes() != s_cur.sizes() || s_cur.size(0) != x_prev.size(0) ||
        s_cur.size(1) != x_prev.size(2) || s_cur.size(2) != x_prev.size(3)) {
        throw DimensionError("generator: label maps must be [B, H, W] matching x_prev");
    }
    const auto n = config_.num_classes;
    for (const auto* s : {&s_prev, &s_cur}) {
        if (s->numel() > 0 && (s->min().item<int64_t>() < 0 || s->max().item<int64_t>() >= n)) {
            throw ValidationError("generator: label outside [0, num_classes)");
        }
    }
    const auto dtype = x_prev.scalar_type();
    const auto oh_prev = nn::one_hot(s_prev, n, dtype);
    const auto oh_cur = nn::one_hot(s_cur, n, dtype);

    GeneratorOutput out;
    std::tie(out.flow, out.occlusion) = predict_flow(oh_prev, oh_cur);
    if (forced_occlusion_) out.occlusion = torch::full_like(out.occlusion, *forced_occlusion_);
    out.warped = warp::bilinear_warp(x_prev, out.flow);

    if (config_.use_spade) {
        out.frame = decode_frame(encode_semantics(oh_cur), encode_warped_image(out.warped), out.occlusion, noise);
    } else {
        const auto raw = decode_frame({}, encode_warped_image(torch::cat({out.warped, oh_cur}, 1)), out.occlusion, noise);
        out.frame = warp::fuse_occlusion(raw, out.warped, out.occlusion);
    }
    return out;
}

GeneratorConfig grow_resolution(Generator& generator) {
    validate(generator->config());
    generator->grow();
    return generator->config();
}

}  // namespace svs::gen

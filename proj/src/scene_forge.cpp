#include "svs/scene_forge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>

#include "svs/error.hpp"

namespace svs::forge {
namespace {

constexpr int kSuper = 4;
constexpr int kBackground = -1;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double unit_double(std::uint64_t& state) { return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53; }

double uniform(std::uint64_t& state, double lo, double hi) { return lo + (hi - lo) * unit_double(state); }

int uniform_int(std::uint64_t& state, int lo, int hi) {
    return lo + static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(hi - lo + 1));
}

double speed(const Vec2& v) { return std::hypot(v.x, v.y); }

struct TextureParams {
    std::array<double, 3> phase{};
    std::array<double, 3> wavelength{};
    Rgb tint{};
};

TextureParams texture_params(std::uint64_t seed) {
    std::uint64_t state = seed ^ 0x5EEDBA5EULL;
    TextureParams p;
    for (int i = 0; i < 3; ++i) {
        p.phase[static_cast<size_t>(i)] = uniform(state, 0.0, 2.0 * std::numbers::pi);
        p.wavelength[static_cast<size_t>(i)] = uniform(state, 9.0, 17.0);
        p.tint[static_cast<size_t>(i)] = static_cast<float>(uniform(state, -0.05, 0.05));
    }
    return p;
}

std::array<double, 3> texture_rgb(const TextureParams& tex, double x, double y) {
    const double w0 = std::sin(2.0 * std::numbers::pi * x / tex.wavelength[0] + tex.phase[0]);
    const double w1 = std::sin(2.0 * std::numbers::pi * y / tex.wavelength[1] + tex.phase[1]);
    const double w2 = std::sin(2.0 * std::numbers::pi * (x + y) / tex.wavelength[2] + tex.phase[2]);
    const double shade = -0.35 + 0.12 * w0 + 0.08 * w1 + 0.05 * w2;
    return {shade + tex.tint[0], shade + tex.tint[1], shade + tex.tint[2]};
}

// Painting order: ascending z_order, ties by list index.
std::vector<size_t> paint_order(const SceneSpec& spec) {
    std::vector<size_t> order(spec.shapes.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return spec.shapes[a].z_order < spec.shapes[b].z_order; });
    return order;
}

bool covers(const ShapeSpec& shape, int t, double px, double py) {
    const double cx = shape.position.x + t * shape.velocity.x;
    const double cy = shape.position.y + t * shape.velocity.y;
    if (shape.geometry == Geometry::Rectangle) {
        const double hw = 0.5 * shape.size.x;
        const double hh = 0.5 * shape.size.y;
        return px >= cx - hw && px < cx + hw && py >= cy - hh && py < cy + hh;
    }
    const double r = 0.5 * shape.size.x;
    const double dx = px - cx;
    const double dy = py - cy;
    return dx * dx + dy * dy < r * r;
}

class Raster {
public:
    Raster(const SceneSpec& spec, int t) : spec_(spec), order_(paint_order(spec)), t_(t) {
        const auto n = static_cast<size_t>(spec.width) * static_cast<size_t>(spec.height);
        center_.resize(n);
        pure_.resize(n);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const int center = surface_at(x + 0.5, y + 0.5);
                bool pure = true;
                for (int a = 0; a < kSuper && pure; ++a)
                    for (int b = 0; b < kSuper && pure; ++b)
                        pure = surface_at(x + (b + 0.5) / kSuper, y + (a + 0.5) / kSuper) == center;
                center_[index(x, y)] = center;
                pure_[index(x, y)] = pure;
            }
        }
    }

    int surface_at(double px, double py) const {
        int top = kBackground;
        for (size_t k : order_)
            if (covers(spec_.shapes[k], t_, px, py)) top = static_cast<int>(k);
        return top;
    }

    size_t index(int x, int y) const { return static_cast<size_t>(y) * spec_.width + x; }
    int center(int x, int y) const { return center_[index(x, y)]; }
    bool pure(int x, int y) const { return pure_[index(x, y)] != 0; }

    Vec2 flow(int x, int y) const {
        const int s = center(x, y);
        const Vec2& v = s == kBackground ? spec_.ego_velocity : spec_.shapes[static_cast<size_t>(s)].velocity;
        return {-v.x, -v.y};
    }

private:
    const SceneSpec& spec_;
    std::vector<size_t> order_;
    int t_;
    std::vector<int> center_;
    std::vector<std::uint8_t> pure_;
};

void check_frame_index(const SceneSpec& spec, int t) {
    if (t < 1 || t >= spec.frames) {
        throw IndexError("frame index " + std::to_string(t) + " outside [1, " + std::to_string(spec.frames) + ")");
    }
}

void fill_frame(const SceneSpec& spec, const Raster& raster, const TextureParams& tex, int t, torch::Tensor out) {
    auto acc = out.accessor<float, 3>();
    const double ox = t * spec.ego_velocity.x;
    const double oy = t * spec.ego_velocity.y;
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            std::array<double, 3> sum{};
            for (int a = 0; a < kSuper; ++a) {
                for (int b = 0; b < kSuper; ++b) {
                    const double px = x + (b + 0.5) / kSuper;
                    const double py = y + (a + 0.5) / kSuper;
                    const int s = raster.surface_at(px, py);
                    if (s == kBackground) {
                        // Background content translates with the ego velocity.
                        const auto bg = texture_rgb(tex, (x - ox) + (b + 0.5) / kSuper, (y - oy) + (a + 0.5) / kSuper);
                        for (size_t c = 0; c < 3; ++c) sum[c] += bg[c];
                    } else {
                        const auto& color = spec.shapes[static_cast<size_t>(s)].color;
                        for (size_t c = 0; c < 3; ++c) sum[c] += color[c];
                    }
                }
            }
            for (int c = 0; c < 3; ++c) acc[c][y][x] = static_cast<float>(sum[static_cast<size_t>(c)] / (kSuper * kSuper));
        }
    }
}

torch::Tensor flow_from(const SceneSpec& spec, const Raster& raster) {
    auto flow = torch::empty({2, spec.height, spec.width}, torch::kFloat32);
    auto acc = flow.accessor<float, 3>();
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const Vec2 f = raster.flow(x, y);
            acc[0][y][x] = static_cast<float>(f.x);
            acc[1][y][x] = static_cast<float>(f.y);
        }
    }
    return flow;
}

// A pixel keeps its content when it is a single surface and every bilinear tap
// of its backward source at t-1 shows that same single surface.
torch::Tensor occlusion_from(const SceneSpec& spec, const Raster& prev, const Raster& cur) {
    auto occ = torch::zeros({1, spec.height, spec.width}, torch::kFloat32);
    auto acc = occ.accessor<float, 3>();
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const Vec2 f = cur.flow(x, y);
            const double sx = x + f.x;
            const double sy = y + f.y;
            bool keep = cur.pure(x, y) && sx >= 0.0 && sy >= 0.0 && sx <= spec.width - 1 && sy <= spec.height - 1;
            if (keep) {
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const int x1 = sx > x0 ? x0 + 1 : x0;
                const int y1 = sy > y0 ? y0 + 1 : y0;
                const int id = cur.center(x, y);
                for (int yy : {y0, y1})
                    for (int xx : {x0, x1}) keep = keep && prev.pure(xx, yy) && prev.center(xx, yy) == id;
            }
            acc[0][y][x] = keep ? 0.0F : 1.0F;
        }
    }
    return occ;
}

}  // namespace

void validate(const SceneSpec& spec, int pyramid_levels) {
    auto fail = [](const std::string& msg) { throw ValidationError("invalid scene: " + msg); };
    if (spec.num_classes < 2) fail("num_classes must be >= 2");
    if (spec.num_classes > 256) fail("num_classes must be <= 256");
    if (spec.frames < 2) fail("frames must be >= 2");
    if (spec.width < 8 || spec.height < 8) fail("width and height must be >= 8");
    const int unit = 1 << std::max(pyramid_levels, 0);
    if (spec.width % unit != 0 || spec.height % unit != 0) {
        fail("width and height must be divisible by 2^" + std::to_string(pyramid_levels));
    }
    if (!std::isfinite(spec.ego_velocity.x) || !std::isfinite(spec.ego_velocity.y)) fail("ego_velocity must be finite");
    const double speed_limit = static_cast<double>(std::min(spec.width, spec.height)) / spec.frames;
    for (size_t i = 0; i < spec.shapes.size(); ++i) {
        const auto& s = spec.shapes[i];
        const std::string tag = "shape " + std::to_string(i) + ": ";
        if (s.class_id < 1 || s.class_id >= spec.num_classes) fail(tag + "class_id must be in [1, num_classes)");
        if (!(s.size.x > 0.0) || (s.geometry == Geometry::Rectangle && !(s.size.y > 0.0))) fail(tag + "size must be positive");
        const double hw = 0.5 * s.size.x;
        const double hh = 0.5 * (s.geometry == Geometry::Rectangle ? s.size.y : s.size.x);
        if (s.position.x - hw < 0.0 || s.position.x + hw > spec.width || s.position.y - hh < 0.0 ||
            s.position.y + hh > spec.height) {
            fail(tag + "shape must fit inside the frame at t=0");
        }
        if (!(speed(s.velocity) < speed_limit)) fail(tag + "velocity magnitude must be < min(width, height)/frames");
        for (float c : s.color)
            if (!(c >= -1.0F && c <= 1.0F)) fail(tag + "color components must be in [-1, 1]");
    }
}

void check_sample(const VideoSample& sample, int num_classes) {
    if (!sample.frames.defined() || sample.frames.dim() != 4 || sample.frames.size(1) != 3) {
        throw DimensionError("frames must be T x 3 x H x W");
    }
    const auto t = sample.frames.size(0);
    const auto h = sample.frames.size(2);
    const auto w = sample.frames.size(3);
    if (sample.semantic.sizes() != torch::IntArrayRef({t, h, w})) throw DimensionError("semantic maps must be T x H x W");
    if (sample.flows.sizes() != torch::IntArrayRef({t - 1, 2, h, w})) throw DimensionError("flows must be (T-1) x 2 x H x W");
    if (sample.occlusions.sizes() != torch::IntArrayRef({t - 1, 1, h, w})) {
        throw DimensionError("occlusions must be (T-1) x 1 x H x W");
    }
    if (sample.semantic.numel() > 0 &&
        (sample.semantic.min().item<int64_t>() < 0 || sample.semantic.max().item<int64_t>() >= num_classes)) {
        throw ValidationError("semantic labels must lie in [0, num_classes)");
    }
    if (!torch::isfinite(sample.flows).all().item<bool>()) throw ValidationError("flows must be finite");
    if (sample.occlusions.numel() > 0 &&
        (sample.occlusions.min().item<float>() < 0.0F || sample.occlusions.max().item<float>() > 1.0F)) {
        throw ValidationError("occlusions must lie in [0, 1]");
    }
}

VideoSample render_scene(const SceneSpec& spec) {
    validate(spec, 0);
    const auto tex = texture_params(spec.seed);
    VideoSample sample;
    sample.frames = torch::empty({spec.frames, 3, spec.height, spec.width}, torch::kFloat32);
    sample.semantic = torch::empty({spec.frames, spec.height, spec.width}, torch::kInt64);
    sample.flows = torch::empty({spec.frames - 1, 2, spec.height, spec.width}, torch::kFloat32);
    sample.occlusions = torch::empty({spec.frames - 1, 1, spec.height, spec.width}, torch::kFloat32);

    std::optional<Raster> prev;
    for (int t = 0; t < spec.frames; ++t) {
        Raster cur(spec, t);
        fill_frame(spec, cur, tex, t, sample.frames[t]);
        auto labels = sample.semantic.accessor<int64_t, 3>();
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const int s = cur.center(x, y);
                labels[t][y][x] = s < 0 ? 0 : spec.shapes[static_cast<size_t>(s)].class_id;
            }
        }
        if (prev) {
            sample.flows[t - 1].copy_(flow_from(spec, cur));
            sample.occlusions[t - 1].copy_(occlusion_from(spec, *prev, cur));
        }
        prev.emplace(std::move(cur));
    }
    return sample;
}

torch::Tensor compute_gt_flow(const SceneSpec& spec, int t) {
    check_frame_index(spec, t);
    return flow_from(spec, Raster(spec, t));
}

torch::Tensor compute_gt_occlusion(const SceneSpec& spec, int t) {
    check_frame_index(spec, t);
    return occlusion_from(spec, Raster(spec, t - 1), Raster(spec, t));
}

Rgb background_color(const SceneSpec& spec, double x, double y) {
    const auto rgb = texture_rgb(texture_params(spec.seed), x, y);
    return {static_cast<float>(rgb[0]), static_cast<float>(rgb[1]), static_cast<float>(rgb[2])};
}

std::vector<Rgb> class_palette(int num_classes) {
    std::vector<Rgb> palette;
    palette.push_back({-0.35F, -0.35F, -0.35F});
    const int fg = std::max(num_classes - 1, 1);
    for (int k = 1; k < num_classes; ++k) {
        // Fully saturated hues evenly spaced around the wheel.
        const double h = 6.0 * (k - 1) / fg;
        const int sector = static_cast<int>(std::floor(h)) % 6;
        const double f = h - std::floor(h);
        std::array<double, 3> rgb{};
        switch (sector) {
        case 0: rgb = {1, f, 0}; break;
        case 1: rgb = {1 - f, 1, 0}; break;
        case 2: rgb = {0, 1, f}; break;
        case 3: rgb = {0, 1 - f, 1}; break;
        case 4: rgb = {f, 0, 1}; break;
        default: rgb = {1, 0, 1 - f}; break;
        }
        palette.push_back({static_cast<float>(0.9 * (2 * rgb[0] - 1)), static_cast<float>(0.9 * (2 * rgb[1] - 1)),
                           static_cast<float>(0.9 * (2 * rgb[2] - 1))});
    }
    return palette;
}

SceneSpec random_scene(const RandomSceneOptions& options, std::uint64_t seed) {
    std::uint64_t state = seed;
    SceneSpec spec;
    spec.width = options.width;
    spec.height = options.height;
    spec.num_classes = options.num_classes;
    spec.frames = options.frames;
    spec.ego_velocity = options.ego_velocity;
    spec.seed = seed;
    const auto palette = class_palette(options.num_classes);

    // Strictly below min(W, H)/T per axis-diagonal.
    const double limit = static_cast<double>(std::min(options.width, options.height)) / options.frames;
    const double step = options.subpixel ? 0.25 : 1.0;
    const int max_steps = static_cast<int>(std::floor(std::min<double>(options.max_speed, (limit - 1e-6) / std::sqrt(2.0)) / step));

    const int count = uniform_int(state, options.min_shapes, std::max(options.min_shapes, options.max_shapes));
    const double min_size = std::max(3.0, options.height / 8.0);
    const double max_size = std::max(min_size, options.height / 2.5);
    for (int i = 0; i < count; ++i) {
        ShapeSpec shape;
        shape.class_id = uniform_int(state, 1, options.num_classes - 1);
        shape.geometry = (splitmix64(state) & 1U) != 0U ? Geometry::Disc : Geometry::Rectangle;
        const double w = std::round(uniform(state, min_size, max_size));
        const double h = shape.geometry == Geometry::Disc ? w : std::round(uniform(state, min_size, max_size));
        shape.size = {w, h};
        shape.position = {std::round(8.0 * uniform(state, 0.5 * w, options.width - 0.5 * w)) / 8.0,
                          std::round(8.0 * uniform(state, 0.5 * h, options.height - 0.5 * h)) / 8.0};
        shape.position.x = std::clamp(shape.position.x, 0.5 * w, options.width - 0.5 * w);
        shape.position.y = std::clamp(shape.position.y, 0.5 * h, options.height - 0.5 * h);
        shape.velocity = {step * uniform_int(state, -max_steps, max_steps), step * uniform_int(state, -max_steps, max_steps)};
        shape.color = palette[static_cast<size_t>(shape.class_id)];
        shape.z_order = i;
        spec.shapes.push_back(shape);
    }
    validate(spec, options.pyramid_levels);
    return spec;
}

SceneSpec scale_scene(const SceneSpec& spec, int factor) {
    if (factor < 1) throw ValidationError("scale factor must be >= 1");
    SceneSpec out = spec;
    out.width *= factor;
    out.height *= factor;
    out.ego_velocity = {spec.ego_velocity.x * factor, spec.ego_velocity.y * factor};
    for (auto& s : out.shapes) {
        s.size = {s.size.x * factor, s.size.y * factor};
        s.position = {s.position.x * factor, s.position.y * factor};
        s.velocity = {s.velocity.x * factor, s.velocity.y * factor};
    }
    return out;
}

}  // namespace svs::forge

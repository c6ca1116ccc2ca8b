#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <torch/torch.h>

// Deterministic "moving shapes" scenes with exact labels, flow and occlusion.
//
// Pixel (x, y) covers [x, x+1) x [y, y+1); its center is (x + 0.5, y + 0.5).
// Colors are rendered from a 4x4 supersample grid per pixel, labels from the
// pixel center. Shapes are painted in ascending (z_order, list index).
namespace svs::forge {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

using Rgb = std::array<float, 3>;

enum class Geometry { Rectangle, Disc };

struct ShapeSpec {
    int class_id = 1;
    Geometry geometry = Geometry::Rectangle;
    // Rectangle: full width/height. Disc: size.x is the diameter.
    Vec2 size{4.0, 4.0};
    // Center of the shape at t = 0.
    Vec2 position{};
    // Pixels per frame.
    Vec2 velocity{};
    Rgb color{1.0F, 1.0F, 1.0F};
    int z_order = 0;
};

struct SceneSpec {
    int width = 64;
    int height = 32;
    int num_classes = 4;
    std::vector<ShapeSpec> shapes;
    Vec2 ego_velocity{};
    int frames = 8;
    std::uint64_t seed = 0;
};

// Throws ValidationError naming the first violated invariant.
void validate(const SceneSpec& spec, int pyramid_levels = 3);

struct VideoSample {
    torch::Tensor frames;      // T x 3 x H x W, float32 in [-1, 1]
    torch::Tensor semantic;    // T x H x W, int64 in [0, N)
    torch::Tensor flows;       // (T-1) x 2 x H x W, flow for target frames 1..T-1
    torch::Tensor occlusions;  // (T-1) x 1 x H x W, values in {0, 1}

    int64_t length() const { return frames.size(0); }
    int64_t height() const { return frames.size(2); }
    int64_t width() const { return frames.size(3); }
};

// Throws DimensionError / ValidationError when the tensors break the sample contract.
void check_sample(const VideoSample& sample, int num_classes);

VideoSample render_scene(const SceneSpec& spec);

// Backward flow for target frame t (1 <= t < T): warped(p) = frame_{t-1}(p + F(p)).
torch::Tensor compute_gt_flow(const SceneSpec& spec, int t);
// 1 where frame t cannot be explained by backward-warping frame t-1.
torch::Tensor compute_gt_occlusion(const SceneSpec& spec, int t);

// Background texture color at continuous position (x, y) for this scene seed.
Rgb background_color(const SceneSpec& spec, double x, double y);

// Class colors; entry 0 is the background reference color.
std::vector<Rgb> class_palette(int num_classes);

struct RandomSceneOptions {
    int width = 64;
    int height = 32;
    int num_classes = 4;
    int frames = 8;
    int min_shapes = 2;
    int max_shapes = 4;
    Vec2 ego_velocity{1.0, 0.0};
    int max_speed = 2;
    // Integer velocities give exactly verifiable warps; subpixel ones are drawn
    // on a quarter-pixel grid.
    bool subpixel = false;
    int pyramid_levels = 3;
};

SceneSpec random_scene(const RandomSceneOptions& options, std::uint64_t seed);

// Same scene at factor x resolution (sizes, positions, velocities scaled).
SceneSpec scale_scene(const SceneSpec& spec, int factor);

}  // namespace svs::forge

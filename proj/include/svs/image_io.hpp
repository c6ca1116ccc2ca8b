#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace svs::io {

// 8-bit interleaved raster, 1 (gray) or 3 (RGB) channels.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

std::vector<std::uint8_t> encode_png(const Image8& image);
Image8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name);

void write_png(const std::filesystem::path& path, const Image8& image);
Image8 read_png(const std::filesystem::path& path);

// Frame values map to bytes as round(127.5 * (v + 1)); bytes map back as b / 127.5 - 1.
std::uint8_t quantize(float value);
float dequantize(std::uint8_t byte);

// 3xHxW float frame in [-1,1] <-> RGB8 image.
Image8 frame_to_image(const torch::Tensor& frame);
torch::Tensor image_to_frame(const Image8& image);

// HxW integer label map <-> gray image (pixel value = class id).
Image8 labels_to_image(const torch::Tensor& labels);
torch::Tensor image_to_labels(const Image8& image);

// 1xHxW map in [0,1] thresholded at 0.5 to 0/255.
Image8 occlusion_to_image(const torch::Tensor& occlusion);
torch::Tensor image_to_occlusion(const Image8& image);

// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height, then
// row-major interleaved (u, v) float32 pairs, all little-endian.
inline constexpr float kFloMagic = 202021.25F;
std::vector<std::uint8_t> encode_flo(const torch::Tensor& flow);
torch::Tensor decode_flo(const std::vector<std::uint8_t>& bytes, const std::string& name);
void write_flo(const std::filesystem::path& path, const torch::Tensor& flow);
torch::Tensor read_flo(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace svs::io

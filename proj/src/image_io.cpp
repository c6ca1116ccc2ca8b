#include "svs/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <png.h>

#include "svs/error.hpp"

namespace svs::io {
namespace {

struct PngWriteBuffer {
    std::vector<std::uint8_t>* out;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* buffer = static_cast<PngWriteBuffer*>(png_get_io_ptr(png));
    buffer->out->insert(buffer->out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngReadCursor {
    const std::vector<std::uint8_t>* in;
    std::size_t offset;
};

void png_read_from_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* cursor = static_cast<PngReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + length > cursor->in->size()) png_error(png, "truncated PNG stream");
    std::memcpy(data, cursor->in->data() + cursor->offset, length);
    cursor->offset += length;
}

[[noreturn]] void png_error_throw(png_structp, png_const_charp message) { throw std::runtime_error(message); }

void png_warning_ignore(png_structp, png_const_charp) {}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
    }
    return v;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    v = to_le(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + 4);
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t offset) {
    std::uint32_t v = 0;
    std::memcpy(&v, in.data() + offset, 4);
    return to_le(v);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image8& image) {
    if (image.channels != 1 && image.channels != 3) throw ValidationError("PNG channels must be 1 or 3");
    if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
        throw DimensionError("PNG pixel buffer does not match its dimensions");
    }
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
    png_infop info = png_create_info_struct(png);
    PngWriteBuffer buffer{&out};
    try {
        png_set_write_fn(png, &buffer, png_write_to_vector, png_flush_noop);
        png_set_IHDR(png, info, image.width, image.height, 8,
                     image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png, 6);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
        }
        png_write_end(png, nullptr);
    } catch (const std::exception& e) {
        png_destroy_write_struct(&png, &info);
        throw IoError(std::string("PNG encode failed: ") + e.what());
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

Image8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG file: " + name);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw, png_warning_ignore);
    png_infop info = png_create_info_struct(png);
    PngReadCursor cursor{&bytes, 0};
    Image8 image;
    try {
        png_set_read_fn(png, &cursor, png_read_from_vector);
        png_read_info(png, info);
        const auto color = png_get_color_type(png, info);
        const auto depth = png_get_bit_depth(png, info);
        if (depth != 8 || (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_GRAY)) {
            throw std::runtime_error("only 8-bit RGB or gray PNG is supported");
        }
        image.width = static_cast<int>(png_get_image_width(png, info));
        image.height = static_cast<int>(png_get_image_height(png, info));
        image.channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
        image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * image.channels);
        const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
        for (int y = 0; y < image.height; ++y) png_read_row(png, image.pixels.data() + y * stride, nullptr);
        png_read_end(png, nullptr);
    } catch (const std::exception& e) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("corrupt PNG " + name + ": " + e.what());
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
    const auto bytes = encode_png(image);
    write_file_atomic(path, bytes.data(), bytes.size());
}

Image8 read_png(const std::filesystem::path& path) { return decode_png(read_file(path), path.string()); }

std::uint8_t quantize(float value) {
    const float scaled = std::round(127.5F * (std::clamp(value, -1.0F, 1.0F) + 1.0F));
    return static_cast<std::uint8_t>(scaled);
}

float dequantize(std::uint8_t byte) { return static_cast<float>(byte) / 127.5F - 1.0F; }

Image8 frame_to_image(const torch::Tensor& frame) {
    if (frame.dim() != 3 || frame.size(0) != 3) throw DimensionError("frame must be 3xHxW");
    auto f = frame.detach().to(torch::kFloat32).contiguous();
    auto acc = f.accessor<float, 3>();
    Image8 image{static_cast<int>(f.size(2)), static_cast<int>(f.size(1)), 3, {}};
    image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
    std::size_t k = 0;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) image.pixels[k++] = quantize(acc[c][y][x]);
    return image;
}

torch::Tensor image_to_frame(const Image8& image) {
    if (image.channels != 3) throw DimensionError("frame image must be RGB");
    auto frame = torch::empty({3, image.height, image.width}, torch::kFloat32);
    auto acc = frame.accessor<float, 3>();
    std::size_t k = 0;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) acc[c][y][x] = dequantize(image.pixels[k++]);
    return frame;
}

Image8 labels_to_image(const torch::Tensor& labels) {
    if (labels.dim() != 2) throw DimensionError("label map must be HxW");
    auto l = labels.detach().to(torch::kInt64).contiguous();
    if (l.numel() > 0 && (l.min().item<int64_t>() < 0 || l.max().item<int64_t>() > 255)) {
        throw ValidationError("label ids must fit in 8 bits");
    }
    Image8 image{static_cast<int>(l.size(1)), static_cast<int>(l.size(0)), 1, {}};
    image.pixels.resize(static_cast<std::size_t>(l.numel()));
    const auto* src = l.data_ptr<int64_t>();
    for (std::size_t i = 0; i < image.pixels.size(); ++i) image.pixels[i] = static_cast<std::uint8_t>(src[i]);
    return image;
}

torch::Tensor image_to_labels(const Image8& image) {
    if (image.channels != 1) throw DimensionError("label image must be single-channel");
    auto labels = torch::empty({image.height, image.width}, torch::kInt64);
    auto* dst = labels.data_ptr<int64_t>();
    for (std::size_t i = 0; i < image.pixels.size(); ++i) dst[i] = image.pixels[i];
    return labels;
}

Image8 occlusion_to_image(const torch::Tensor& occlusion) {
    auto o = occlusion.detach().to(torch::kFloat32).reshape({occlusion.size(-2), occlusion.size(-1)}).contiguous();
    Image8 image{static_cast<int>(o.size(1)), static_cast<int>(o.size(0)), 1, {}};
    image.pixels.resize(static_cast<std::size_t>(o.numel()));
    const auto* src = o.data_ptr<float>();
    for (std::size_t i = 0; i < image.pixels.size(); ++i) image.pixels[i] = src[i] >= 0.5F ? 255 : 0;
    return image;
}

torch::Tensor image_to_occlusion(const Image8& image) {
    if (image.channels != 1) throw DimensionError("occlusion image must be single-channel");
    auto occ = torch::empty({1, image.height, image.width}, torch::kFloat32);
    auto* dst = occ.data_ptr<float>();
    for (std::size_t i = 0; i < image.pixels.size(); ++i) dst[i] = image.pixels[i] >= 128 ? 1.0F : 0.0F;
    return occ;
}

std::vector<std::uint8_t> encode_flo(const torch::Tensor& flow) {
    if (flow.dim() != 3 || flow.size(0) != 2) throw DimensionError("flow must be 2xHxW");
    auto f = flow.detach().to(torch::kFloat32).contiguous();
    const auto height = f.size(1);
    const auto width = f.size(2);
    std::vector<std::uint8_t> out;
    out.reserve(12 + static_cast<std::size_t>(width * height * 8));
    put_u32(out, std::bit_cast<std::uint32_t>(kFloMagic));
    put_u32(out, static_cast<std::uint32_t>(width));
    put_u32(out, static_cast<std::uint32_t>(height));
    auto acc = f.accessor<float, 3>();
    for (int64_t y = 0; y < height; ++y) {
        for (int64_t x = 0; x < width; ++x) {
            put_u32(out, std::bit_cast<std::uint32_t>(acc[0][y][x]));
            put_u32(out, std::bit_cast<std::uint32_t>(acc[1][y][x]));
        }
    }
    return out;
}

torch::Tensor decode_flo(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    if (bytes.size() < 12) throw IoError("truncated .flo header: " + name);
    if (std::bit_cast<float>(get_u32(bytes, 0)) != kFloMagic) throw IoError("bad .flo magic: " + name);
    const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
    const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
    if (width <= 0 || height <= 0) throw IoError("bad .flo dimensions: " + name);
    if (bytes.size() != 12 + static_cast<std::size_t>(width) * height * 8) throw IoError("truncated .flo payload: " + name);
    auto flow = torch::empty({2, height, width}, torch::kFloat32);
    auto acc = flow.accessor<float, 3>();
    std::size_t offset = 12;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            acc[0][y][x] = std::bit_cast<float>(get_u32(bytes, offset));
            acc[1][y][x] = std::bit_cast<float>(get_u32(bytes, offset + 4));
            offset += 8;
        }
    }
    return flow;
}

void write_flo(const std::filesystem::path& path, const torch::Tensor& flow) {
    const auto bytes = encode_flo(flow);
    write_file_atomic(path, bytes.data(), bytes.size());
}

torch::Tensor read_flo(const std::filesystem::path& path) { return decode_flo(read_file(path), path.string()); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

}  // namespace svs::io

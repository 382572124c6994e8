#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace zsmad {

// 8-bit RGB, row-major, interleaved.
struct RawImage {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;

    RawImage() = default;
    RawImage(int h, int w, uint8_t fill = 0) : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, fill) {}

    bool empty() const { return pixels.empty(); }
    uint8_t& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    uint8_t at(int y, int x, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    bool operator==(const RawImage&) const = default;
};

enum class ResizeMode { ShorterSideCenterCrop, Direct };
enum class Interpolation { Bilinear, Bicubic };

struct PreprocessSpec {
    int target_size = 224;
    ResizeMode resize_mode = ResizeMode::ShorterSideCenterCrop;
    std::array<float, 3> channel_mean{0.f, 0.f, 0.f};
    std::array<float, 3> channel_std{1.f, 1.f, 1.f};
    Interpolation interpolation = Interpolation::Bicubic;

    // Throws ConstraintError on a non-positive size or std component.
    void validate() const;
};

// Channel-major 3 x size x size.
struct ImageTensor {
    int size = 0;
    std::vector<float> data;
};

// PNG or JPEG by content sniffing. Throws IoError or DecodeError.
RawImage decode(const std::filesystem::path& path);
RawImage decode_bytes(std::span<const uint8_t> bytes, const std::string& name = "<memory>");

// Resize per spec on float samples, scale to [0, 1], then (x - mean) / std.
ImageTensor preprocess(const RawImage& img, const PreprocessSpec& spec);

// Size of the intermediate image before the centre crop (height, width).
std::array<int, 2> shorter_side_size(int height, int width, int target);

std::vector<uint8_t> encode_png(const RawImage& img);
void write_png(const std::filesystem::path& path, const RawImage& img);

}  // namespace zsmad

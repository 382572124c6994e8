#include "zsmad/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "io_util.hpp"
#include "zsmad/errors.hpp"

namespace zsmad {

namespace {

constexpr uint8_t kPngMagic[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

bool contains(std::span<const uint8_t> bytes, std::span<const uint8_t> needle) {
    return std::search(bytes.begin(), bytes.end(), needle.begin(), needle.end()) != bytes.end();
}

cv::Mat to_float_mat(const RawImage& img) {
    cv::Mat m(img.height, img.width, CV_8UC3, const_cast<uint8_t*>(img.pixels.data()));
    cv::Mat f;
    m.convertTo(f, CV_32FC3);
    return f;
}

}  // namespace

void PreprocessSpec::validate() const {
    if (target_size <= 0) throw ConstraintError(fmt::format("target size {} must be positive", target_size));
    for (float s : channel_std) {
        if (!(s > 0.f) || !std::isfinite(s)) throw ConstraintError(fmt::format("channel std {} must be positive", s));
    }
    for (float m : channel_mean) {
        if (!std::isfinite(m)) throw ConstraintError("channel mean must be finite");
    }
}

RawImage decode_bytes(std::span<const uint8_t> bytes, const std::string& name) {
    const bool png = bytes.size() >= 8 && std::memcmp(bytes.data(), kPngMagic, 8) == 0;
    const bool jpeg = bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
    if (!png && !jpeg) throw DecodeError(name + ": not a PNG or JPEG file");
    static constexpr uint8_t kIend[] = {'I', 'E', 'N', 'D'};
    static constexpr uint8_t kEoi[] = {0xFF, 0xD9};
    if (png && !contains(bytes, kIend)) throw DecodeError(name + ": truncated PNG (no IEND chunk)");
    if (jpeg && !contains(bytes.subspan(2), kEoi)) throw DecodeError(name + ": truncated JPEG (no end-of-image marker)");

    cv::Mat bgr;
    try {
        const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<uint8_t*>(bytes.data()));
        bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception& e) {
        throw DecodeError(name + ": " + e.what());
    }
    if (bgr.empty() || bgr.type() != CV_8UC3) throw DecodeError(name + ": corrupt image data");
    RawImage out(bgr.rows, bgr.cols);
    cv::Mat rgb(bgr.rows, bgr.cols, CV_8UC3, out.pixels.data());
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return out;
}

RawImage decode(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    return decode_bytes(std::span(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size()), path.string());
}

std::array<int, 2> shorter_side_size(int height, int width, int target) {
    if (height <= width) {
        return {target, static_cast<int>(static_cast<double>(target) * width / height)};
    }
    return {static_cast<int>(static_cast<double>(target) * height / width), target};
}

ImageTensor preprocess(const RawImage& img, const PreprocessSpec& spec) {
    spec.validate();
    if (img.empty() || img.height <= 0 || img.width <= 0) throw ConstraintError("cannot preprocess an empty image");
    const int s = spec.target_size;
    const int interp = spec.interpolation == Interpolation::Bicubic ? cv::INTER_CUBIC : cv::INTER_LINEAR;
    cv::Mat src = to_float_mat(img);
    cv::Mat resized;
    if (spec.resize_mode == ResizeMode::Direct) {
        if (img.height == s && img.width == s) resized = src;
        else cv::resize(src, resized, cv::Size(s, s), 0, 0, interp);
    } else {
        const auto [h, w] = shorter_side_size(img.height, img.width, s);
        cv::Mat scaled;
        if (h == img.height && w == img.width) scaled = src;
        else cv::resize(src, scaled, cv::Size(w, h), 0, 0, interp);
        const int top = static_cast<int>(std::nearbyint((h - s) / 2.0));
        const int left = static_cast<int>(std::nearbyint((w - s) / 2.0));
        resized = scaled(cv::Rect(left, top, s, s));
    }
    ImageTensor out;
    out.size = s;
    out.data.resize(static_cast<size_t>(3) * s * s);
    const size_t plane = static_cast<size_t>(s) * s;
    for (int y = 0; y < s; ++y) {
        const auto* row = resized.ptr<cv::Vec3f>(y);
        for (int x = 0; x < s; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = row[x][c] / 255.0f;
                out.data[c * plane + static_cast<size_t>(y) * s + x] = (v - spec.channel_mean[c]) / spec.channel_std[c];
            }
        }
    }
    return out;
}

std::vector<uint8_t> encode_png(const RawImage& img) {
    if (img.empty()) throw ConstraintError("cannot encode an empty image");
    cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<uint8_t*>(img.pixels.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    std::vector<uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) throw IoError("PNG encoding failed");
    return out;
}

void write_png(const std::filesystem::path& path, const RawImage& img) {
    const auto bytes = encode_png(img);
    detail::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace zsmad

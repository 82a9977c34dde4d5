#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "birdplan/errors.hpp"

namespace birdplan {

/// 8-bit RGB image, row-major, interleaved channels.
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3

    RasterImage() = default;
    RasterImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 0) {}

    std::uint8_t* at(int x, int y) { return pixels.data() + (std::size_t(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (std::size_t(y) * width + x) * 3;
    }
    bool empty() const { return width == 0 || height == 0; }
};

/// Float RGB working image used by the blending pipeline.
struct ImageF {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // width * height * 3

    ImageF() = default;
    ImageF(int w, int h) : width(w), height(h), data(std::size_t(w) * h * 3, 0.f) {}

    float* at(int x, int y) { return data.data() + (std::size_t(y) * width + x) * 3; }
    const float* at(int x, int y) const {
        return data.data() + (std::size_t(y) * width + x) * 3;
    }
};

/// Single-channel float plane (weights, luma, Laplacian responses).
struct PlaneF {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    PlaneF() = default;
    PlaneF(int w, int h, float fill = 0.f)
        : width(w), height(h), data(std::size_t(w) * h, fill) {}

    float& at(int x, int y) { return data[std::size_t(y) * width + x]; }
    float at(int x, int y) const { return data[std::size_t(y) * width + x]; }
};

ImageF to_float(const RasterImage& img);
RasterImage quantize(const ImageF& img);  // clamp to [0,255], round half up

// ITU-R 601 luma on the 0..255 scale.
PlaneF luma(const RasterImage& img);
PlaneF luma(const ImageF& img);

// Bilinear sample with edge clamping; (x, y) in pixel coordinates where
// texel centers sit at integer positions.
void bilinear_sample(const ImageF& img, double x, double y, float out[3]);

// Separable Gaussian blur, truncated at 3 sigma. sigma == 0 is a copy.
ImageF gaussian_blur(const ImageF& img, double sigma);
PlaneF gaussian_blur(const PlaneF& img, double sigma);

RasterImage read_png(const std::filesystem::path& path);
void write_png(const RasterImage& img, const std::filesystem::path& path);

}  // namespace birdplan

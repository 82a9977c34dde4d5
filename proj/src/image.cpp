#include "birdplan/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace birdplan {

ImageF to_float(const RasterImage& img) {
    ImageF out(img.width, img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        out.data[i] = static_cast<float>(img.pixels[i]);
    return out;
}

RasterImage quantize(const ImageF& img) {
    RasterImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        float v = std::floor(img.data[i] + 0.5f);
        out.pixels[i] = static_cast<std::uint8_t>(std::clamp(v, 0.f, 255.f));
    }
    return out;
}

PlaneF luma(const RasterImage& img) {
    PlaneF out(img.width, img.height);
    for (std::size_t i = 0, n = std::size_t(img.width) * img.height; i < n; ++i) {
        const std::uint8_t* p = img.pixels.data() + i * 3;
        out.data[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return out;
}

PlaneF luma(const ImageF& img) {
    PlaneF out(img.width, img.height);
    for (std::size_t i = 0, n = std::size_t(img.width) * img.height; i < n; ++i) {
        const float* p = img.data.data() + i * 3;
        out.data[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return out;
}

void bilinear_sample(const ImageF& img, double x, double y, float out[3]) {
    x = std::clamp(x, 0.0, double(img.width - 1));
    y = std::clamp(y, 0.0, double(img.height - 1));
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    double fx = x - x0, fy = y - y0;
    const float* p00 = img.at(x0, y0);
    const float* p10 = img.at(x1, y0);
    const float* p01 = img.at(x0, y1);
    const float* p11 = img.at(x1, y1);
    for (int c = 0; c < 3; ++c) {
        double top = p00[c] * (1 - fx) + p10[c] * fx;
        double bot = p01[c] * (1 - fx) + p11[c] * fx;
        out[c] = static_cast<float>(top * (1 - fy) + bot * fy);
    }
}

namespace {

std::vector<float> gaussian_kernel(double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : k) v = static_cast<float>(v / sum);
    return k;
}

// horizontal then vertical pass over `channels`-interleaved data, edge clamp
void convolve_separable(std::vector<float>& data, int w, int h, int channels,
                        const std::vector<float>& kernel) {
    int radius = static_cast<int>(kernel.size()) / 2;
    std::vector<float> tmp(data.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                double acc = 0;
                for (int k = -radius; k <= radius; ++k) {
                    int xi = std::clamp(x + k, 0, w - 1);
                    acc += kernel[k + radius] * data[(std::size_t(y) * w + xi) * channels + c];
                }
                tmp[(std::size_t(y) * w + x) * channels + c] = static_cast<float>(acc);
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                double acc = 0;
                for (int k = -radius; k <= radius; ++k) {
                    int yi = std::clamp(y + k, 0, h - 1);
                    acc += kernel[k + radius] * tmp[(std::size_t(yi) * w + x) * channels + c];
                }
                data[(std::size_t(y) * w + x) * channels + c] = static_cast<float>(acc);
            }
}

}  // namespace

ImageF gaussian_blur(const ImageF& img, double sigma) {
    ImageF out = img;
    if (sigma <= 0) return out;
    convolve_separable(out.data, out.width, out.height, 3, gaussian_kernel(sigma));
    return out;
}

PlaneF gaussian_blur(const PlaneF& img, double sigma) {
    PlaneF out = img;
    if (sigma <= 0) return out;
    convolve_separable(out.data, out.width, out.height, 1, gaussian_kernel(sigma));
    return out;
}

RasterImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "rb"), std::fclose);
    if (!fp) throw MissingInput("cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("failed to decode PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    RasterImage img(static_cast<int>(png_get_image_width(png, info)),
                    static_cast<int>(png_get_image_height(png, info)));
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.at(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
    if (img.empty()) throw ValidationError("write_png: empty image");
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), std::fclose);
    if (!fp) throw Error("cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed to encode PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.at(0, y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace birdplan

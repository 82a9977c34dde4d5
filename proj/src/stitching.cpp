#include "birdplan/stitching.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace birdplan {

PlaneF BlurMask::to_keep_mask(int width, int height) const {
    PlaneF mask(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            mask.at(x, y) = pixel_blurred(x, y) ? 0.f : 1.f;
    return mask;
}

BlurMask detect_blur(const RasterImage& image, int tile_size, double threshold) {
    if (tile_size < 4) throw ValidationError("detect_blur: tile_size must be >= 4");
    if (image.empty()) throw ValidationError("detect_blur: empty image");

    BlurMask mask;
    mask.tile_size = tile_size;
    mask.tiles_x = (image.width + tile_size - 1) / tile_size;
    mask.tiles_y = (image.height + tile_size - 1) / tile_size;
    mask.grid.assign(std::size_t(mask.tiles_x) * mask.tiles_y, 0);

    PlaneF lum = luma(image);
    // 3x3 Laplacian [0 1 0; 1 -4 1; 0 1 0], interior pixels only
    std::vector<double> sum(mask.grid.size(), 0), sum2(mask.grid.size(), 0);
    std::vector<std::int64_t> count(mask.grid.size(), 0);
    for (int y = 1; y + 1 < image.height; ++y) {
        for (int x = 1; x + 1 < image.width; ++x) {
            double lap = lum.at(x - 1, y) + lum.at(x + 1, y) + lum.at(x, y - 1) +
                         lum.at(x, y + 1) - 4.0 * lum.at(x, y);
            std::size_t t = std::size_t(y / tile_size) * mask.tiles_x + x / tile_size;
            sum[t] += lap;
            sum2[t] += lap * lap;
            ++count[t];
        }
    }
    for (std::size_t t = 0; t < mask.grid.size(); ++t) {
        double var = 0;
        if (count[t] > 0) {
            double mean = sum[t] / count[t];
            var = sum2[t] / count[t] - mean * mean;
        }
        mask.grid[t] = var < threshold ? 1 : 0;
    }
    return mask;
}

namespace {

void check_dimensions(const std::vector<CompositeInput>& inputs) {
    if (inputs.empty()) throw ValidationError("blend: no inputs");
    for (const auto& in : inputs) {
        if (in.image.width != inputs[0].image.width || in.image.height != inputs[0].image.height)
            throw ValidationError("blend: input dimensions differ");
        if (in.keep_mask.width != in.image.width || in.keep_mask.height != in.image.height)
            throw ValidationError("blend: mask dimensions do not match image");
    }
}

constexpr float kInf = std::numeric_limits<float>::max() / 4;

// Chamfer distance (in pixels) from each trusted pixel to the nearest
// untrusted pixel; untrusted pixels get 0. No untrusted pixels -> kInf.
PlaneF distance_to_untrusted(const PlaneF& mask) {
    const int w = mask.width, h = mask.height;
    PlaneF d(w, h, kInf);
    bool any_untrusted = false;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.at(x, y) < 0.5f) { d.at(x, y) = 0; any_untrusted = true; }
    if (!any_untrusted) return d;

    const float ortho = 1.0f, diag = 1.41421356f;
    auto relax = [&](int x, int y, int nx, int ny, float cost) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return;
        d.at(x, y) = std::min(d.at(x, y), d.at(nx, ny) + cost);
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            relax(x, y, x - 1, y, ortho);
            relax(x, y, x, y - 1, ortho);
            relax(x, y, x - 1, y - 1, diag);
            relax(x, y, x + 1, y - 1, diag);
        }
    for (int y = h - 1; y >= 0; --y)
        for (int x = w - 1; x >= 0; --x) {
            relax(x, y, x + 1, y, ortho);
            relax(x, y, x, y + 1, ortho);
            relax(x, y, x + 1, y + 1, diag);
            relax(x, y, x - 1, y + 1, diag);
        }
    return d;
}

// Raw per-input weights: keep_mask * linear feather ramp.
std::vector<PlaneF> feather_weights(const std::vector<CompositeInput>& inputs) {
    std::vector<PlaneF> weights;
    weights.reserve(inputs.size());
    for (const auto& in : inputs) {
        PlaneF dist = distance_to_untrusted(in.keep_mask);
        PlaneF w(in.keep_mask.width, in.keep_mask.height);
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            float ramp = std::min(dist.data[i] / float(kFeatherRampPx), 1.0f);
            w.data[i] = in.keep_mask.data[i] * ramp;
        }
        weights.push_back(std::move(w));
    }
    return weights;
}

// Normalize to a partition of unity; holes (all weights zero) become
// one-hot on the input with the largest keep weight, first input on ties.
std::int64_t normalize_weights(std::vector<PlaneF>& weights,
                               const std::vector<CompositeInput>& inputs) {
    std::int64_t holes = 0;
    const std::size_t n = weights[0].data.size();
    for (std::size_t i = 0; i < n; ++i) {
        float total = 0;
        for (const auto& w : weights) total += w.data[i];
        if (total > 0) {
            for (auto& w : weights) w.data[i] /= total;
        } else {
            ++holes;
            std::size_t pick = 0;
            for (std::size_t k = 1; k < inputs.size(); ++k)
                if (inputs[k].keep_mask.data[i] > inputs[pick].keep_mask.data[i]) pick = k;
            weights[pick].data[i] = 1.f;
        }
    }
    return holes;
}

void fill_report(StitchReport* report, const std::vector<CompositeInput>& inputs,
                 const std::vector<double>& gains, std::int64_t holes, const char* mode,
                 bool fallback) {
    if (!report) return;
    report->inputs.clear();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        double trusted = 0;
        for (float v : inputs[i].keep_mask.data) trusted += v;
        report->inputs.push_back({inputs[i].source_subscene_id,
                                  trusted / double(inputs[i].keep_mask.data.size()), gains[i]});
    }
    report->hole_pixels = holes;
    report->blend_mode = mode;
    report->gain_fallback = fallback;
}

}  // namespace

std::vector<PlaneF> blend_weights(const std::vector<CompositeInput>& inputs,
                                  std::int64_t* hole_pixels) {
    check_dimensions(inputs);
    std::vector<PlaneF> weights = feather_weights(inputs);
    std::int64_t holes = normalize_weights(weights, inputs);
    if (hole_pixels) *hole_pixels = holes;
    return weights;
}

std::vector<double> gain_compensate(const std::vector<CompositeInput>& inputs, bool* fallback) {
    check_dimensions(inputs);
    const int n = static_cast<int>(inputs.size());
    if (fallback) *fallback = false;
    if (n == 1) return {1.0};

    std::vector<PlaneF> lum;
    lum.reserve(n);
    for (const auto& in : inputs) lum.push_back(luma(in.image));

    // mean intensities over each pairwise trusted overlap
    struct Overlap { int i, j; double mean_i, mean_j; std::int64_t count; };
    std::vector<Overlap> overlaps;
    const std::size_t npx = lum[0].data.size();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double si = 0, sj = 0;
            std::int64_t c = 0;
            for (std::size_t p = 0; p < npx; ++p) {
                if (inputs[i].keep_mask.data[p] >= 0.5f && inputs[j].keep_mask.data[p] >= 0.5f) {
                    si += lum[i].data[p];
                    sj += lum[j].data[p];
                    ++c;
                }
            }
            if (c > 0) overlaps.push_back({i, j, si / c, sj / c, c});
        }
    if (overlaps.empty()) {
        if (fallback) *fallback = true;
        return std::vector<double>(n, 1.0);
    }

    // minimize  sum_pairs N_ij (g_i m_ij - g_j m_ji)^2 + lambda sum (g_i - 1)^2
    double mean_count = 0;
    for (const auto& o : overlaps) mean_count += double(o.count);
    mean_count /= double(overlaps.size());
    const double lambda = 0.01 * mean_count;

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Constant(n, 0.0);
    for (const auto& o : overlaps) {
        double w = double(o.count);
        A(o.i, o.i) += w * o.mean_i * o.mean_i;
        A(o.j, o.j) += w * o.mean_j * o.mean_j;
        A(o.i, o.j) -= w * o.mean_i * o.mean_j;
        A(o.j, o.i) -= w * o.mean_i * o.mean_j;
    }
    for (int i = 0; i < n; ++i) {
        A(i, i) += lambda;
        b(i) += lambda;
    }
    Eigen::VectorXd g = A.ldlt().solve(b);

    std::vector<double> gains(n);
    double ref = g(0) != 0 ? g(0) : 1.0;
    for (int i = 0; i < n; ++i) gains[i] = g(i) / ref;
    return gains;
}

RasterImage feather_blend(const std::vector<CompositeInput>& inputs, StitchReport* report) {
    check_dimensions(inputs);
    bool fallback = false;
    std::vector<double> gains = gain_compensate(inputs, &fallback);

    std::vector<PlaneF> weights = feather_weights(inputs);
    std::int64_t holes = normalize_weights(weights, inputs);

    ImageF out(inputs[0].image.width, inputs[0].image.height);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const RasterImage& img = inputs[k].image;
        const float g = static_cast<float>(gains[k]);
        for (std::size_t p = 0; p < weights[k].data.size(); ++p) {
            float w = weights[k].data[p];
            if (w == 0) continue;
            for (int c = 0; c < 3; ++c)
                out.data[p * 3 + c] += w * g * img.pixels[p * 3 + c];
        }
    }
    fill_report(report, inputs, gains, holes, "feather", fallback);
    return quantize(out);
}

// ---- multi-band -----------------------------------------------------------

namespace {

template <typename Img>
Img pad_to(const Img& src, int w, int h, int channels) {
    Img out;
    out.width = w;
    out.height = h;
    out.data.assign(std::size_t(w) * h * channels, 0);
    for (int y = 0; y < h; ++y) {
        int sy = std::min(y, src.height - 1);
        for (int x = 0; x < w; ++x) {
            int sx = std::min(x, src.width - 1);
            for (int c = 0; c < channels; ++c)
                out.data[(std::size_t(y) * w + x) * channels + c] =
                    src.data[(std::size_t(sy) * src.width + sx) * channels + c];
        }
    }
    return out;
}

// 5-tap binomial kernel [1 4 6 4 1]/16, edge clamp
template <typename Img>
Img smooth5(const Img& src, int channels) {
    static const float k[5] = {1 / 16.f, 4 / 16.f, 6 / 16.f, 4 / 16.f, 1 / 16.f};
    Img tmp = src, out = src;
    const int w = src.width, h = src.height;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                double acc = 0;
                for (int i = -2; i <= 2; ++i)
                    acc += k[i + 2] *
                           src.data[(std::size_t(y) * w + std::clamp(x + i, 0, w - 1)) * channels + c];
                tmp.data[(std::size_t(y) * w + x) * channels + c] = float(acc);
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c) {
                double acc = 0;
                for (int i = -2; i <= 2; ++i)
                    acc += k[i + 2] *
                           tmp.data[(std::size_t(std::clamp(y + i, 0, h - 1)) * w + x) * channels + c];
                out.data[(std::size_t(y) * w + x) * channels + c] = float(acc);
            }
    return out;
}

template <typename Img>
Img downsample2(const Img& src, int channels) {
    Img smooth = smooth5(src, channels);
    Img out;
    out.width = (src.width + 1) / 2;
    out.height = (src.height + 1) / 2;
    out.data.assign(std::size_t(out.width) * out.height * channels, 0);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < channels; ++c)
                out.data[(std::size_t(y) * out.width + x) * channels + c] =
                    smooth.data[(std::size_t(2 * y) * src.width + 2 * x) * channels + c];
    return out;
}

template <typename Img>
Img upsample2(const Img& src, int w, int h, int channels) {
    Img out;
    out.width = w;
    out.height = h;
    out.data.assign(std::size_t(w) * h * channels, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                out.data[(std::size_t(y) * w + x) * channels + c] =
                    src.data[(std::size_t(std::min(y / 2, src.height - 1)) * src.width +
                              std::min(x / 2, src.width - 1)) * channels + c];
    return smooth5(out, channels);
}

}  // namespace

RasterImage multiband_blend(const std::vector<CompositeInput>& inputs, int bands,
                            StitchReport* report) {
    check_dimensions(inputs);
    if (bands < 1) throw ValidationError("multiband_blend: bands must be >= 1");

    bool fallback = false;
    std::vector<double> gains = gain_compensate(inputs, &fallback);
    std::vector<PlaneF> weights = feather_weights(inputs);
    std::int64_t holes = normalize_weights(weights, inputs);

    const int w0 = inputs[0].image.width, h0 = inputs[0].image.height;
    // limit bands so the coarsest level stays non-trivial
    while (bands > 1 && (std::min(w0, h0) >> (bands - 1)) < 4) --bands;
    const int align = 1 << (bands - 1);
    const int pw = (w0 + align - 1) / align * align;
    const int ph = (h0 + align - 1) / align * align;

    // accumulated combined Laplacian pyramid, one entry per band
    std::vector<ImageF> combined(bands);

    for (std::size_t k = 0; k < inputs.size(); ++k) {
        ImageF img = to_float(inputs[k].image);
        const float g = static_cast<float>(gains[k]);
        for (auto& v : img.data) v *= g;
        ImageF level = pad_to(img, pw, ph, 3);
        PlaneF wlevel = pad_to(weights[k], pw, ph, 1);

        for (int b = 0; b < bands; ++b) {
            ImageF lap;
            if (b + 1 < bands) {
                ImageF next = downsample2(level, 3);
                ImageF up = upsample2(next, level.width, level.height, 3);
                lap = level;
                for (std::size_t i = 0; i < lap.data.size(); ++i) lap.data[i] -= up.data[i];
                level = std::move(next);
            } else {
                lap = level;  // residual base band
            }
            if (combined[b].width == 0) {
                combined[b] = lap;
                for (std::size_t i = 0; i < lap.data.size(); ++i) {
                    float w = wlevel.data[i / 3];
                    combined[b].data[i] = lap.data[i] * w;
                }
            } else {
                for (std::size_t i = 0; i < lap.data.size(); ++i)
                    combined[b].data[i] += lap.data[i] * wlevel.data[i / 3];
            }
            if (b + 1 < bands) wlevel = downsample2(wlevel, 1);
        }
    }

    // weight pyramids may not sum to 1 after smoothing; renormalize per level
    {
        std::vector<std::vector<PlaneF>> wpyrs(inputs.size());
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            PlaneF wl = pad_to(weights[k], pw, ph, 1);
            for (int b = 0; b < bands; ++b) {
                wpyrs[k].push_back(wl);
                if (b + 1 < bands) wl = downsample2(wl, 1);
            }
        }
        for (int b = 0; b < bands; ++b) {
            for (std::size_t i = 0; i < combined[b].data.size() / 3; ++i) {
                float total = 0;
                for (std::size_t k = 0; k < inputs.size(); ++k) total += wpyrs[k][b].data[i];
                if (total > 1e-6f && std::abs(total - 1.f) > 1e-6f)
                    for (int c = 0; c < 3; ++c) combined[b].data[i * 3 + c] /= total;
            }
        }
    }

    // collapse
    ImageF acc = combined[bands - 1];
    for (int b = bands - 2; b >= 0; --b) {
        ImageF up = upsample2(acc, combined[b].width, combined[b].height, 3);
        acc = combined[b];
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += up.data[i];
    }

    ImageF out(w0, h0);
    for (int y = 0; y < h0; ++y)
        for (int x = 0; x < w0; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y)[c] = acc.at(x, y)[c];

    fill_report(report, inputs, gains, holes, "multiband", fallback);
    return quantize(out);
}

// ---- top-level stitch -----------------------------------------------------

RasterImage stitch(const RenderPlan& plan,
                   const std::vector<std::pair<int, RasterImage>>& renders,
                   const BlurConfig& blur_cfg, BlendMode blend, StitchReport* report) {
    auto find_render = [&](int id) -> const RasterImage& {
        for (const auto& [rid, img] : renders)
            if (rid == id) return img;
        throw IncompletePlan("no render supplied for sub-scene " + std::to_string(id));
    };

    if (plan.mode == PlanMode::StitchFree) {
        const RasterImage& img = find_render(plan.subscene_ids.at(0));
        if (report) {
            report->inputs = {{plan.subscene_ids[0], 1.0, 1.0}};
            report->hole_pixels = 0;
            report->blend_mode = "none";
            report->gain_fallback = false;
        }
        return img;
    }

    std::vector<CompositeInput> inputs;
    for (int id : plan.subscene_ids) {
        const RasterImage& img = find_render(id);
        CompositeInput in;
        in.source_subscene_id = id;
        in.keep_mask =
            detect_blur(img, blur_cfg.tile_size, blur_cfg.threshold).to_keep_mask(img.width, img.height);
        in.image = img;
        inputs.push_back(std::move(in));
    }
    return blend == BlendMode::Feather ? feather_blend(inputs, report)
                                       : multiband_blend(inputs, 5, report);
}

// ---- metrics --------------------------------------------------------------

double compute_psnr(const RasterImage& a, const RasterImage& b) {
    if (a.width != b.width || a.height != b.height)
        throw ValidationError("compute_psnr: dimension mismatch");
    double se = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = double(a.pixels[i]) - double(b.pixels[i]);
        se += d * d;
    }
    double mse = se / double(a.pixels.size());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double compute_ssim(const RasterImage& a, const RasterImage& b) {
    if (a.width != b.width || a.height != b.height)
        throw ValidationError("compute_ssim: dimension mismatch");
    constexpr int kWin = 11;
    if (a.width < kWin || a.height < kWin)
        throw ValidationError("compute_ssim: image smaller than the 11x11 window");

    static const auto window = [] {
        std::array<double, kWin> k{};
        double sum = 0;
        for (int i = 0; i < kWin; ++i) {
            double d = i - kWin / 2;
            k[i] = std::exp(-0.5 * d * d / (1.5 * 1.5));
            sum += k[i];
        }
        for (auto& v : k) v /= sum;
        return k;
    }();

    PlaneF la = luma(a), lb = luma(b);
    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double c2 = (0.03 * 255) * (0.03 * 255);

    double total = 0;
    std::int64_t count = 0;
    for (int y = 0; y + kWin <= a.height; ++y) {
        for (int x = 0; x + kWin <= a.width; ++x) {
            double mu_a = 0, mu_b = 0, va = 0, vb = 0, cov = 0;
            for (int j = 0; j < kWin; ++j)
                for (int i = 0; i < kWin; ++i) {
                    double w = window[i] * window[j];
                    double pa = la.at(x + i, y + j), pb = lb.at(x + i, y + j);
                    mu_a += w * pa;
                    mu_b += w * pb;
                    va += w * pa * pa;
                    vb += w * pb * pb;
                    cov += w * pa * pb;
                }
            va -= mu_a * mu_a;
            vb -= mu_b * mu_b;
            cov -= mu_a * mu_b;
            double ssim = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                          ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
            total += ssim;
            ++count;
        }
    }
    return total / double(count);
}

}  // namespace birdplan

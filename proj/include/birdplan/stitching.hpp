#pragma once

#include <string>
#include <vector>

#include "birdplan/image.hpp"
#include "birdplan/registration.hpp"

namespace birdplan {

struct BlurMask {
    int tile_size = 32;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::uint8_t> grid;  // tiles_x * tiles_y, 1 = blurred

    bool tile_blurred(int tx, int ty) const { return grid[std::size_t(ty) * tiles_x + tx] != 0; }
    bool pixel_blurred(int x, int y) const {
        return tile_blurred(x / tile_size, y / tile_size);
    }
    // keep weight: 1 on sharp tiles, 0 on blurred tiles
    PlaneF to_keep_mask(int width, int height) const;
};

struct CompositeInput {
    RasterImage image;
    PlaneF keep_mask;  // per-pixel weight in [0,1], 1 = trusted
    int source_subscene_id = -1;
};

struct BlurConfig {
    int tile_size = 32;
    double threshold = 100.0;
};

enum class BlendMode { Feather, Multiband };

struct StitchReport {
    struct Input {
        int subscene_id = -1;
        double trusted_fraction = 0;
        double gain = 1;
    };
    std::vector<Input> inputs;
    std::int64_t hole_pixels = 0;
    std::string blend_mode;
    bool gain_fallback = false;  // no trusted overlap, all gains forced to 1
};

// Variance of the 3x3 Laplacian of the luma, per tile; a tile is blurred
// when its variance falls below the threshold.
BlurMask detect_blur(const RasterImage& image, int tile_size, double threshold);

// Least-squares per-image gains over pairwise trusted overlaps, anchored by
// a unit-gain regularizer and normalized so the first input's gain is 1.
std::vector<double> gain_compensate(const std::vector<CompositeInput>& inputs,
                                    bool* fallback = nullptr);

constexpr int kFeatherRampPx = 16;

// Normalized per-input feather weights (keep mask times a distance ramp,
// scaled to sum to 1 per pixel). Holes become one-hot.
std::vector<PlaneF> blend_weights(const std::vector<CompositeInput>& inputs,
                                  std::int64_t* hole_pixels = nullptr);

RasterImage feather_blend(const std::vector<CompositeInput>& inputs,
                          StitchReport* report = nullptr);
RasterImage multiband_blend(const std::vector<CompositeInput>& inputs, int bands = 5,
                            StitchReport* report = nullptr);

RasterImage stitch(const RenderPlan& plan,
                   const std::vector<std::pair<int, RasterImage>>& renders,
                   const BlurConfig& blur_cfg, BlendMode blend, StitchReport* report = nullptr);

// Metrics (section shape: min/max/average tables are built by the CLI).
double compute_psnr(const RasterImage& a, const RasterImage& b);  // +inf when identical
double compute_ssim(const RasterImage& a, const RasterImage& b);

}  // namespace birdplan

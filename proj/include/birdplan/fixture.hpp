#pragma once

#include <cstdint>
#include <filesystem>

#include "birdplan/pipeline.hpp"

namespace birdplan {

/// Synthetic scene recipe: a nadir camera grid over a textured ground plane.
struct FixtureSpec {
    int grid_x = 20, grid_y = 10;
    double extent_x = 100, extent_y = 50;  // world units, centered at origin
    double altitude = 12;
    double pose_jitter = 0.0;  // stddev of camera center jitter, world units

    int image_width = 160, image_height = 120;
    double focal = 120;

    int texels_per_unit = 10;
    std::uint64_t noise_seed = 0;

    int cloud_points = 2000;
    double cloud_noise = 0.0;  // stddev of z perturbation on cloud samples

    int num_queries = 20;
    double query_altitude = 25;

    double blur_radius = 8.0;
};

struct FixturePaths {
    std::filesystem::path recon_dir;
    std::filesystem::path texture;
    std::filesystem::path scene;    // scene.json for the synthetic engine
    std::filesystem::path queries;  // queries.json
    std::filesystem::path truth_dir;
};

// Deterministic procedural texture: smooth color field plus a fine grid
// pattern that keeps the Laplacian variance high everywhere.
RasterImage make_texture(int width, int height, std::uint64_t seed);

FixturePaths make_fixture(const FixtureSpec& spec, const std::filesystem::path& out_dir);

}  // namespace birdplan

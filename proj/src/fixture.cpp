#include "birdplan/fixture.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace birdplan {

RasterImage make_texture(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // coarse random color lattice, bilinearly upsampled
    const int cell = 64;
    const int gw = width / cell + 2, gh = height / cell + 2;
    std::vector<std::array<double, 3>> lattice(std::size_t(gw) * gh);
    std::uniform_real_distribution<double> level(60.0, 200.0);
    for (auto& c : lattice) c = {level(rng), level(rng), level(rng)};

    RasterImage tex(width, height);
    const double period = 8.0;  // texels; fine detail for blur detection
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double gx = double(x) / cell, gy = double(y) / cell;
            int x0 = int(gx), y0 = int(gy);
            double fx = gx - x0, fy = gy - y0;
            double detail = 45.0 * std::sin(2 * M_PI * x / period) * std::sin(2 * M_PI * y / period);
            std::uint8_t* px = tex.at(x, y);
            for (int c = 0; c < 3; ++c) {
                double v00 = lattice[std::size_t(y0) * gw + x0][c];
                double v10 = lattice[std::size_t(y0) * gw + x0 + 1][c];
                double v01 = lattice[std::size_t(y0 + 1) * gw + x0][c];
                double v11 = lattice[std::size_t(y0 + 1) * gw + x0 + 1][c];
                double v = (v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                           (v01 * (1 - fx) + v11 * fx) * fy;
                v += detail;
                px[c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    return tex;
}

FixturePaths make_fixture(const FixtureSpec& spec, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::mt19937_64 rng(spec.noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const Mat3 nadir = Eigen::DiagonalMatrix<double, 3>(1, -1, -1);

    // reconstruction: one shared pinhole camera, a grid of nadir views
    Reconstruction recon;
    PinholeIntrinsics intr;
    intr.camera_id = 1;
    intr.width = spec.image_width;
    intr.height = spec.image_height;
    intr.fx = intr.fy = spec.focal;
    intr.cx = spec.image_width / 2.0;
    intr.cy = spec.image_height / 2.0;
    recon.intrinsics[1] = intr;

    int image_id = 1;
    for (int gy = 0; gy < spec.grid_y; ++gy) {
        for (int gx = 0; gx < spec.grid_x; ++gx, ++image_id) {
            double x = (gx + 0.5) / spec.grid_x * spec.extent_x - spec.extent_x / 2;
            double y = (gy + 0.5) / spec.grid_y * spec.extent_y - spec.extent_y / 2;
            Vec3 center(x, y, spec.altitude);
            if (spec.pose_jitter > 0)
                center += spec.pose_jitter * Vec3(gauss(rng), gauss(rng), gauss(rng));
            View v;
            v.image_id = image_id;
            char name[32];
            std::snprintf(name, sizeof name, "img_%04d.png", image_id);
            v.image_name = name;
            v.camera_id = 1;
            v.pose.rotation = nadir;
            v.pose.center = center;
            recon.views.push_back(std::move(v));
        }
    }

    // sparse cloud sampled on the ground plane
    std::uniform_real_distribution<double> ux(-spec.extent_x / 2, spec.extent_x / 2);
    std::uniform_real_distribution<double> uy(-spec.extent_y / 2, spec.extent_y / 2);
    for (int i = 0; i < spec.cloud_points; ++i) {
        SparsePoint p;
        p.id = std::uint64_t(i) + 1;
        double z = spec.cloud_noise > 0 ? spec.cloud_noise * gauss(rng) : 0.0;
        p.position = Vec3(ux(rng), uy(rng), z);
        p.color = std::array<std::uint8_t, 3>{128, 128, 128};
        p.error = 0.5;
        recon.cloud.points.push_back(std::move(p));
    }

    FixturePaths paths;
    paths.recon_dir = out_dir / "recon";
    save_reconstruction(recon, paths.recon_dir);

    // world window: survey extent plus margin for footprints at the edges
    double half_w = 0.5 * spec.image_width / spec.focal;
    double half_h = 0.5 * spec.image_height / spec.focal;
    double max_alt = std::max(spec.altitude, spec.query_altitude) + 5 * spec.pose_jitter;
    double margin = std::max(half_w, half_h) * max_alt + 2.0;
    FootprintRect window{-spec.extent_x / 2 - margin, spec.extent_x / 2 + margin,
                         -spec.extent_y / 2 - margin, spec.extent_y / 2 + margin};

    RasterImage texture =
        make_texture(int(window.width() * spec.texels_per_unit),
                     int(window.height() * spec.texels_per_unit), spec.noise_seed);
    paths.texture = out_dir / "texture.png";
    write_png(texture, paths.texture);

    SceneSpec scene{paths.texture, window, spec.blur_radius};
    paths.scene = out_dir / "scene.json";
    save_scene_spec(scene, paths.scene);

    // held-out nadir queries over the central area, higher altitude so
    // footprints span sub-scene boundaries
    std::vector<QueryCamera> queries;
    std::uniform_real_distribution<double> qx(-0.35 * spec.extent_x, 0.35 * spec.extent_x);
    std::uniform_real_distribution<double> qy(-0.3 * spec.extent_y, 0.3 * spec.extent_y);
    for (int i = 0; i < spec.num_queries; ++i) {
        QueryCamera q;
        char name[32];
        std::snprintf(name, sizeof name, "query_%03d", i);
        q.id = name;
        q.intrinsics = intr;
        q.pose.rotation = nadir;
        q.pose.center = Vec3(qx(rng), qy(rng), spec.query_altitude);
        queries.push_back(std::move(q));
    }
    {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& q : queries) {
            Eigen::Quaterniond quat(q.pose.rotation);
            if (quat.w() < 0) quat.coeffs() *= -1;
            arr.push_back(
                {{"id", q.id},
                 {"intrinsics",
                  {{"width", q.intrinsics.width},
                   {"height", q.intrinsics.height},
                   {"fx", q.intrinsics.fx},
                   {"fy", q.intrinsics.fy},
                   {"cx", q.intrinsics.cx},
                   {"cy", q.intrinsics.cy}}},
                 {"quaternion", {quat.w(), quat.x(), quat.y(), quat.z()}},
                 {"center", {q.pose.center.x(), q.pose.center.y(), q.pose.center.z()}}});
        }
        paths.queries = out_dir / "queries.json";
        std::ofstream out(paths.queries);
        out << nlohmann::json{{"schema_version", 1}, {"queries", arr}}.dump(2) << '\n';
    }

    // full-coverage oracle renders for every query
    GroundPlane plane;  // fixture plane is exactly z = 0
    SyntheticEngine oracle(texture, plane, window, spec.blur_radius);
    paths.truth_dir = out_dir / "truth";
    std::filesystem::create_directories(paths.truth_dir);
    for (const auto& q : queries) {
        RenderRequest req{q.intrinsics, q.pose, q.intrinsics.width, q.intrinsics.height};
        write_png(oracle.render_reference(req), paths.truth_dir / (q.id + ".png"));
    }
    return paths;
}

}  // namespace birdplan

#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "birdplan/sparse_io.hpp"

using namespace birdplan;

namespace {

std::map<int, PinholeIntrinsics> cams_from(const std::string& text) {
    std::istringstream in(text);
    return parse_cameras(in);
}

std::vector<View> views_from(const std::string& text) {
    std::istringstream in(text);
    return parse_images(in);
}

}  // namespace

TEST_CASE("parse_cameras PINHOLE") {
    auto cams = cams_from("1 PINHOLE 6000 4000 2900 2900 3000 2000\n");
    REQUIRE(cams.size() == 1);
    const auto& c = cams.at(1);
    CHECK(c.width == 6000);
    CHECK(c.height == 4000);
    CHECK(c.fx == doctest::Approx(2900));
    CHECK(c.fy == doctest::Approx(2900));
    CHECK(c.cx == doctest::Approx(3000));
    CHECK(c.cy == doctest::Approx(2000));
}

TEST_CASE("parse_cameras SIMPLE_PINHOLE expands f") {
    auto cams = cams_from("3 SIMPLE_PINHOLE 100 80 50 50 40\n");
    CHECK(cams.at(3).fx == doctest::Approx(50));
    CHECK(cams.at(3).fy == doctest::Approx(50));
}

TEST_CASE("parse_cameras comments and errors") {
    CHECK(cams_from("# comment line\n").empty());
    CHECK_THROWS_AS(cams_from("1 RADIAL 100 100 50 50 50 0.1 0.1\n"), UnsupportedModel);
    CHECK_THROWS_AS(cams_from("1 PINHOLE 100 100 abc 50 50 50\n"), ParseError);
    CHECK_THROWS_AS(cams_from("1 PINHOLE 100 100 50 50 50 50\n"
                              "1 PINHOLE 100 100 50 50 50 50\n"),
                    ParseError);
}

TEST_CASE("parse_images identity pose") {
    auto views = views_from("1 1 0 0 0 0 0 0 1 a.png\n\n");
    REQUIRE(views.size() == 1);
    CHECK((views[0].pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(views[0].pose.center.norm() < 1e-12);
}

TEST_CASE("parse_images 180 degree rotation about x") {
    // hand check: R = diag(1,-1,-1), C = -R^T t = (0, 0, 10)
    auto views = views_from("1 0 1 0 0 0 0 10 1 a.png\n\n");
    Mat3 expect = Eigen::DiagonalMatrix<double, 3>(1, -1, -1);
    CHECK((views[0].pose.rotation - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((views[0].pose.center - Vec3(0, 0, 10)).norm() < 1e-12);
}

TEST_CASE("parse_images normalizes the quaternion") {
    auto views = views_from("1 2 0 0 0 1 2 3 1 a.png\n\n");
    CHECK((views[0].pose.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((views[0].pose.center - Vec3(-1, -2, -3)).norm() < 1e-12);
}

TEST_CASE("parse_images rejects bad input") {
    CHECK_THROWS_AS(views_from("1 0 0 0 0 0 0 0 1 a.png\n\n"), ParseError);  // zero quaternion
    CHECK_THROWS_AS(views_from("1 1 0 0 0 0 0 0 1 a.png\n"), ParseError);    // odd pairing
}

TEST_CASE("parse_points3d") {
    std::istringstream in("7 1.0 2.0 3.0 255 0 0 0.5 1 2 3 4\n");
    auto cloud = parse_points3d(in);
    REQUIRE(cloud.points.size() == 1);
    CHECK(cloud.points[0].id == 7);
    CHECK((cloud.points[0].position - Vec3(1, 2, 3)).norm() == 0);
    CHECK((*cloud.points[0].color)[0] == 255);
    CHECK(*cloud.points[0].error == doctest::Approx(0.5));

    std::istringstream empty("");
    CHECK(parse_points3d(empty).points.empty());

    std::istringstream dup("7 1 2 3 0 0 0 0\n7 4 5 6 0 0 0 0\n");
    CHECK_THROWS_AS(parse_points3d(dup), ParseError);
}

namespace {

Reconstruction random_recon(std::uint64_t seed, int n_views) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Reconstruction r;
    PinholeIntrinsics intr;
    intr.camera_id = 1;
    intr.width = 640;
    intr.height = 480;
    intr.fx = 500 + 100 * u(rng);
    intr.fy = 500 + 100 * u(rng);
    intr.cx = 320 + 10 * u(rng);
    intr.cy = 240 + 10 * u(rng);
    r.intrinsics[1] = intr;
    for (int i = 0; i < n_views; ++i) {
        View v;
        v.image_id = i + 1;
        v.image_name = "img_" + std::to_string(i) + ".png";
        v.camera_id = 1;
        Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
        q.normalize();
        v.pose.rotation = q.toRotationMatrix();
        v.pose.center = Vec3(10 * u(rng), 10 * u(rng), 10 * u(rng));
        r.views.push_back(v);
    }
    for (int i = 0; i < 25; ++i) {
        SparsePoint p;
        p.id = i + 1;
        p.position = Vec3(u(rng), u(rng), u(rng));
        p.color = std::array<std::uint8_t, 3>{10, 20, 30};
        p.error = std::abs(u(rng));
        r.cloud.points.push_back(p);
    }
    return r;
}

}  // namespace

TEST_CASE("round-trip preserves numeric fields") {
    auto dir = std::filesystem::temp_directory_path() / "birdplan_roundtrip";
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        Reconstruction a = random_recon(seed, 12);
        save_reconstruction(a, dir);
        Reconstruction b = load_reconstruction(dir);
        REQUIRE(b.views.size() == a.views.size());
        const auto& ia = a.intrinsics.at(1);
        const auto& ib = b.intrinsics.at(1);
        CHECK(ib.fx == doctest::Approx(ia.fx).epsilon(1e-9));
        CHECK(ib.fy == doctest::Approx(ia.fy).epsilon(1e-9));
        CHECK(ib.cx == doctest::Approx(ia.cx).epsilon(1e-9));
        CHECK(ib.cy == doctest::Approx(ia.cy).epsilon(1e-9));
        for (std::size_t i = 0; i < a.views.size(); ++i) {
            CHECK((a.views[i].pose.rotation - b.views[i].pose.rotation).cwiseAbs().maxCoeff() <
                  1e-9);
            CHECK((a.views[i].pose.center - b.views[i].pose.center).norm() < 1e-9);
        }
        for (std::size_t i = 0; i < a.cloud.points.size(); ++i)
            CHECK((a.cloud.points[i].position - b.cloud.points[i].position).norm() < 1e-9);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("parsed rotations are orthonormal with det +1") {
    Reconstruction r = random_recon(99, 30);
    auto dir = std::filesystem::temp_directory_path() / "birdplan_ortho";
    save_reconstruction(r, dir);
    Reconstruction b = load_reconstruction(dir);
    for (const auto& v : b.views) {
        const Mat3& m = v.pose.rotation;
        CHECK((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("pose conversion involution") {
    Reconstruction r = random_recon(7, 10);
    for (const auto& v : r.views) {
        Eigen::Vector4d q;
        Vec3 t;
        pose_to_world_to_camera(v.pose, q, t);
        Mat3 r_wc = quaternion_to_rotation(q[0], q[1], q[2], q[3]);
        CameraPose back;
        back.rotation = r_wc.transpose();
        back.center = -(r_wc.transpose() * t);
        CHECK((back.rotation - v.pose.rotation).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((back.center - v.pose.center).norm() < 1e-9);
    }
}

TEST_CASE("load_reconstruction consistency checks") {
    auto dir = std::filesystem::temp_directory_path() / "birdplan_consistency";
    Reconstruction r = random_recon(1, 3);
    save_reconstruction(r, dir);
    CHECK(load_reconstruction(dir).views.size() == 3);

    // dangling camera id
    r.views[0].camera_id = 99;
    save_reconstruction(r, dir);
    CHECK_THROWS_AS(load_reconstruction(dir), ConsistencyError);

    std::filesystem::remove(dir / "points3D.txt");
    CHECK_THROWS_AS(load_reconstruction(dir), MissingInput);
    std::filesystem::remove_all(dir);
}

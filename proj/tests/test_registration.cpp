#include <doctest.h>

#include <random>

#include "birdplan/registration.hpp"

using namespace birdplan;

namespace {

PinholeIntrinsics nadir_intr() {
    PinholeIntrinsics intr;
    intr.camera_id = 1;
    intr.width = 2000;
    intr.height = 1000;
    intr.fx = intr.fy = 1000;
    intr.cx = 1000;
    intr.cy = 500;
    return intr;
}

CameraPose nadir_pose(double x, double y, double altitude) {
    CameraPose p;
    p.rotation = Eigen::DiagonalMatrix<double, 3>(1, -1, -1);
    p.center = Vec3(x, y, altitude);
    return p;
}

double area(const FootprintRect& r) {
    return std::max(0.0, r.max_u - r.min_u) * std::max(0.0, r.max_v - r.min_v);
}

}  // namespace

TEST_CASE("rect predicates") {
    FootprintRect a{0, 10, 0, 10};
    FootprintRect b{5, 15, 5, 15};
    FootprintRect c{10, 20, 0, 10};   // shares an edge
    FootprintRect d{11, 20, 0, 10};   // disjoint
    FootprintRect e{2, 8, 2, 8};      // inside a
    CHECK(rect_intersects(a, b));
    CHECK(rect_intersects(a, c));     // closed sets: touching counts
    CHECK_FALSE(rect_intersects(a, d));
    CHECK(rect_contains(a, e));
    CHECK(rect_contains(a, a));       // containment is not strict
    CHECK_FALSE(rect_contains(e, a));

    auto i = rect_intersection(a, b);
    CHECK(i.min_u == 5);
    CHECK(i.max_u == 10);
    CHECK(i.min_v == 5);
    CHECK(i.max_v == 10);
}

TEST_CASE("register_query stitch-free when one sub-scene contains the footprint") {
    GroundPlane plane;
    std::vector<IndexEntry> index = {
        {0, FootprintRect{-50, 50, -50, 50}, Vec3(0, 0, 0)},
        {1, FootprintRect{40, 140, -50, 50}, Vec3(90, 0, 0)},
    };
    // altitude 10 footprint is 20 x 10 around (0,0): inside sub-scene 0 only
    auto plan = register_query("q", nadir_intr(), nadir_pose(0, 0, 10), plane, index);
    CHECK(plan.mode == PlanMode::StitchFree);
    CHECK(plan.subscene_ids == std::vector<int>{0});

    // both contain it; nearest center wins
    auto plan2 = register_query("q", nadir_intr(), nadir_pose(45, 0, 2), plane, index);
    CHECK(plan2.mode == PlanMode::StitchFree);
    CHECK(plan2.subscene_ids == std::vector<int>{0});
    auto plan3 = register_query("q", nadir_intr(), nadir_pose(46, 0, 2), plane, index);
    CHECK(plan3.subscene_ids == std::vector<int>{1});
}

TEST_CASE("register_query nearest-center tie breaks on lowest id") {
    GroundPlane plane;
    std::vector<IndexEntry> index = {
        {3, FootprintRect{-50, 50, -50, 50}, Vec3(-5, 0, 0)},
        {1, FootprintRect{-50, 50, -50, 50}, Vec3(5, 0, 0)},
    };
    auto plan = register_query("q", nadir_intr(), nadir_pose(0, 0, 5), plane, index);
    CHECK(plan.mode == PlanMode::StitchFree);
    CHECK(plan.subscene_ids == std::vector<int>{1});
}

TEST_CASE("register_query stitch-required ordered by overlap area") {
    GroundPlane plane;
    // footprint at altitude 10 around (0,0): [-10,10] x [-5,5]
    std::vector<IndexEntry> index = {
        {0, FootprintRect{-30, -2, -20, 20}, Vec3(-15, 0, 0)},   // overlap 8 x 10 = 80
        {1, FootprintRect{-4, 30, -20, 20}, Vec3(15, 0, 0)},     // overlap 14 x 10 = 140
        {2, FootprintRect{100, 200, 100, 200}, Vec3(150, 150, 0)},
    };
    auto plan = register_query("q", nadir_intr(), nadir_pose(0, 0, 10), plane, index);
    CHECK(plan.mode == PlanMode::StitchRequired);
    CHECK(plan.subscene_ids == std::vector<int>{1, 0});
    CHECK(plan.query_image_id == "q");
    CHECK(plan.query_footprint.min_u == doctest::Approx(-10));
}

TEST_CASE("register_query equal overlap ties break on ascending id") {
    GroundPlane plane;
    std::vector<IndexEntry> index = {
        {5, FootprintRect{-20, 0, -20, 20}, Vec3(-10, 0, 0)},
        {2, FootprintRect{0, 20, -20, 20}, Vec3(10, 0, 0)},
    };
    auto plan = register_query("q", nadir_intr(), nadir_pose(0, 0, 10), plane, index);
    CHECK(plan.mode == PlanMode::StitchRequired);
    CHECK(plan.subscene_ids == std::vector<int>{2, 5});
}

TEST_CASE("register_query out of coverage") {
    GroundPlane plane;
    std::vector<IndexEntry> index = {{0, FootprintRect{-50, 50, -50, 50}, Vec3::Zero()}};
    CHECK_THROWS_AS(register_query("q", nadir_intr(), nadir_pose(500, 500, 10), plane, index),
                    OutOfCoverage);
}

TEST_CASE("register_query matches brute-force classification") {
    GroundPlane plane;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1, 1);
    auto intr = nadir_intr();
    int n_free = 0, n_stitch = 0, n_out = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<IndexEntry> index;
        int n = 2 + int(3 * std::abs(u(rng)));
        for (int i = 0; i < n; ++i) {
            double cx = 80 * u(rng), cy = 80 * u(rng);
            double hw = 10 + 40 * std::abs(u(rng)), hh = 10 + 40 * std::abs(u(rng));
            index.push_back({i, FootprintRect{cx - hw, cx + hw, cy - hh, cy + hh},
                             Vec3(cx, cy, 0)});
        }
        auto pose = nadir_pose(100 * u(rng), 100 * u(rng), 5 + 10 * std::abs(u(rng)));
        auto fp = camera_footprint(intr, pose, plane);
        std::vector<int> hits, containing;
        for (const auto& e : index) {
            if (rect_intersects(e.rect, fp)) hits.push_back(e.subscene_id);
            if (rect_contains(e.rect, fp)) containing.push_back(e.subscene_id);
        }
        if (hits.empty()) {
            ++n_out;
            CHECK_THROWS_AS(register_query("q", intr, pose, plane, index), OutOfCoverage);
            continue;
        }
        auto plan = register_query("q", intr, pose, plane, index);
        if (!containing.empty()) {
            ++n_free;
            CHECK(plan.mode == PlanMode::StitchFree);
            REQUIRE(plan.subscene_ids.size() == 1);
            CHECK(std::count(containing.begin(), containing.end(), plan.subscene_ids[0]) == 1);
        } else {
            ++n_stitch;
            CHECK(plan.mode == PlanMode::StitchRequired);
            // soundness + completeness: the plan is exactly the hit set
            std::vector<int> sorted = plan.subscene_ids;
            std::sort(sorted.begin(), sorted.end());
            CHECK(sorted == hits);
            // ordering: non-increasing overlap area
            for (std::size_t k = 1; k < plan.subscene_ids.size(); ++k) {
                double prev = area(rect_intersection(index[plan.subscene_ids[k - 1]].rect, fp));
                double cur = area(rect_intersection(index[plan.subscene_ids[k]].rect, fp));
                CHECK(prev >= cur - 1e-12);
            }
        }
        // determinism
        auto again = register_query("q", intr, pose, plane, index);
        CHECK(again.subscene_ids == plan.subscene_ids);
        CHECK(again.mode == plan.mode);
    }
    // the trial mix exercises all three outcomes
    CHECK(n_free > 0);
    CHECK(n_stitch > 0);
    CHECK(n_out > 0);
}

TEST_CASE("register_query translation equivariance") {
    GroundPlane plane;
    auto intr = nadir_intr();
    std::vector<IndexEntry> index = {
        {0, FootprintRect{-30, 5, -20, 20}, Vec3(-12, 0, 0)},
        {1, FootprintRect{-5, 30, -20, 20}, Vec3(12, 0, 0)},
    };
    auto plan = register_query("q", intr, nadir_pose(1, 2, 10), plane, index);
    const Vec3 shift(40, -25, 0);
    std::vector<IndexEntry> moved = index;
    for (auto& e : moved) {
        e.rect.min_u += shift.x(); e.rect.max_u += shift.x();
        e.rect.min_v += shift.y(); e.rect.max_v += shift.y();
        e.center += shift;
    }
    auto plan2 = register_query("q", intr, nadir_pose(1 + shift.x(), 2 + shift.y(), 10), plane,
                                moved);
    CHECK(plan2.mode == plan.mode);
    CHECK(plan2.subscene_ids == plan.subscene_ids);
    CHECK(plan2.query_footprint.min_u == doctest::Approx(plan.query_footprint.min_u + shift.x()));
    CHECK(plan2.query_footprint.max_v == doctest::Approx(plan.query_footprint.max_v + shift.y()));
}

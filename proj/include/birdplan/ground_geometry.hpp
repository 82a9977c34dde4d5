#pragma once

#include <utility>
#include <vector>

#include "birdplan/decomposition.hpp"
#include "birdplan/sparse_io.hpp"

namespace birdplan {

/// Plane {x : n.x + d = 0} with a fixed right-handed 2D basis (u, v, n).
struct GroundPlane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0;
    Vec3 basis_u = Vec3::UnitX();
    Vec3 basis_v = Vec3::UnitY();

    Vec3 origin() const { return -offset * normal; }
    Vec3 point_from_uv(double u, double v) const {
        return origin() + u * basis_u + v * basis_v;
    }
    double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

struct FootprintRect {
    double min_u = 0, max_u = 0;
    double min_v = 0, max_v = 0;

    double width() const { return max_u - min_u; }
    double height() const { return max_v - min_v; }
    double area() const { return width() * height(); }
};

// Total least squares fit; the normal is the direction of least variance.
// With trim_fraction > 0 a single re-fit pass discards that fraction of the
// points farthest from the first fit.
GroundPlane fit_plane(const SparsePointCloud& cloud, double trim_fraction = 0.1);
GroundPlane fit_plane(const std::vector<Vec3>& points, double trim_fraction = 0.1);

// Camera-frame positions of the four image corners, cyclic order
// starting at (0,0): [(-cx,-cy,f), (w-cx,-cy,f), (w-cx,h-cy,f), (-cx,h-cy,f)]
// with f = fx; anamorphic pixels are handled by scaling y by fx/fy.
std::array<Vec3, 4> image_corners(const PinholeIntrinsics& intr);

inline Vec3 project_to_world(const CameraPose& pose, const Vec3& p_cam) {
    return pose.rotation * p_cam + pose.center;
}

// Intersection of the forward ray origin -> through with the plane, in
// plane coordinates. Throws RayParallel / IntersectBehind.
std::pair<double, double> ray_plane_intersect(const Vec3& origin, const Vec3& through,
                                              const GroundPlane& plane);

FootprintRect camera_footprint(const PinholeIntrinsics& intr, const CameraPose& pose,
                               const GroundPlane& plane);

FootprintRect subscene_footprint(const SubScene& subscene, const Reconstruction& recon,
                                 const GroundPlane& plane);

inline FootprintRect rect_union(const FootprintRect& a, const FootprintRect& b) {
    return {std::min(a.min_u, b.min_u), std::max(a.max_u, b.max_u),
            std::min(a.min_v, b.min_v), std::max(a.max_v, b.max_v)};
}

}  // namespace birdplan

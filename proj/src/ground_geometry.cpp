#include "birdplan/ground_geometry.hpp"

#include <algorithm>
#include <cmath>

#include "birdplan/errors.hpp"

namespace birdplan {
namespace {

GroundPlane plane_through(const std::vector<Vec3>& pts) {
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());

    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
        Vec3 d = p - centroid;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // eigenvalues ascending; the smallest axis is the normal
    double span = eig.eigenvalues()(2);
    if (!(span > 0) || eig.eigenvalues()(1) <= span * 1e-12)
        throw DegenerateGeometry("plane fit: points are collinear or coincident");

    Vec3 n = eig.eigenvectors().col(0).normalized();
    // deterministic sign: largest-magnitude component positive
    int axis = 0;
    n.cwiseAbs().maxCoeff(&axis);
    if (n[axis] < 0) n = -n;

    GroundPlane plane;
    plane.normal = n;
    plane.offset = -n.dot(centroid);
    Vec3 u = Vec3::UnitX() - n.x() * n;
    if (u.norm() < 1e-8) u = Vec3::UnitY() - n.y() * n;
    plane.basis_u = u.normalized();
    plane.basis_v = n.cross(plane.basis_u);  // (u, v, n) right-handed
    return plane;
}

}  // namespace

GroundPlane fit_plane(const std::vector<Vec3>& points, double trim_fraction) {
    if (trim_fraction < 0 || trim_fraction >= 0.5)
        throw ValidationError("fit_plane: trim_fraction must be in [0, 0.5)");
    if (points.size() < 3)
        throw DegenerateGeometry("plane fit: need at least 3 points");
    for (const auto& p : points)
        if (!p.allFinite()) throw ValidationError("plane fit: non-finite point");

    GroundPlane plane = plane_through(points);
    std::size_t drop = static_cast<std::size_t>(trim_fraction * points.size());
    if (drop == 0 || points.size() - drop < 3) return plane;

    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(plane.signed_distance(points[a])) <
               std::abs(plane.signed_distance(points[b]));
    });
    std::vector<Vec3> kept;
    kept.reserve(points.size() - drop);
    for (std::size_t i = 0; i + drop < order.size(); ++i) kept.push_back(points[order[i]]);
    return plane_through(kept);
}

GroundPlane fit_plane(const SparsePointCloud& cloud, double trim_fraction) {
    std::vector<Vec3> pts;
    pts.reserve(cloud.points.size());
    for (const auto& p : cloud.points) pts.push_back(p.position);
    return fit_plane(pts, trim_fraction);
}

std::array<Vec3, 4> image_corners(const PinholeIntrinsics& intr) {
    const double f = intr.fx;
    const double sy = intr.fx / intr.fy;  // anamorphic correction; 1 for fx == fy
    const double w = intr.width, h = intr.height;
    return {Vec3(0 - intr.cx, (0 - intr.cy) * sy, f),
            Vec3(w - intr.cx, (0 - intr.cy) * sy, f),
            Vec3(w - intr.cx, (h - intr.cy) * sy, f),
            Vec3(0 - intr.cx, (h - intr.cy) * sy, f)};
}

std::pair<double, double> ray_plane_intersect(const Vec3& origin, const Vec3& through,
                                              const GroundPlane& plane) {
    Vec3 dir = through - origin;
    double denom = plane.normal.dot(dir);
    if (std::abs(denom) < 1e-12)
        throw RayParallel("ray parallel to ground plane");
    double t = -plane.signed_distance(origin) / denom;
    if (t <= 0)
        throw IntersectBehind("ray meets the plane behind the camera");
    Vec3 x = origin + t * dir;
    Vec3 rel = x - plane.origin();
    return {rel.dot(plane.basis_u), rel.dot(plane.basis_v)};
}

FootprintRect camera_footprint(const PinholeIntrinsics& intr, const CameraPose& pose,
                               const GroundPlane& plane) {
    auto corners = image_corners(intr);
    FootprintRect rect;
    bool first = true;
    for (const auto& c : corners) {
        Vec3 world_corner = project_to_world(pose, c);
        double u, v;
        try {
            std::tie(u, v) = ray_plane_intersect(pose.center, world_corner, plane);
        } catch (const Error&) {
            throw HorizonError("corner ray does not reach the ground plane");
        }
        if (first) {
            rect = {u, u, v, v};
            first = false;
        } else {
            rect.min_u = std::min(rect.min_u, u);
            rect.max_u = std::max(rect.max_u, u);
            rect.min_v = std::min(rect.min_v, v);
            rect.max_v = std::max(rect.max_v, v);
        }
    }
    return rect;
}

FootprintRect subscene_footprint(const SubScene& subscene, const Reconstruction& recon,
                                 const GroundPlane& plane) {
    FootprintRect rect;
    bool first = true;
    for (int image_id : subscene.member_ids) {
        auto it = std::find_if(recon.views.begin(), recon.views.end(),
                               [&](const View& v) { return v.image_id == image_id; });
        if (it == recon.views.end())
            throw ConsistencyError("sub-scene member image " + std::to_string(image_id) +
                                   " not in reconstruction");
        FootprintRect r;
        try {
            r = camera_footprint(recon.intrinsics_for(*it), it->pose, plane);
        } catch (const HorizonError&) {
            throw HorizonError("horizon camera in sub-scene, image " + std::to_string(image_id));
        }
        rect = first ? r : rect_union(rect, r);
        first = false;
    }
    if (first) throw EmptySubScene("sub-scene " + std::to_string(subscene.id) + " has no members");
    return rect;
}

}  // namespace birdplan

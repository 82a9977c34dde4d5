#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "birdplan/errors.hpp"

namespace birdplan {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct PinholeIntrinsics {
    int camera_id = 0;
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;

    void validate() const;
};

/// Camera-to-world pose: world point = rotation * camera point + center.
struct CameraPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 center = Vec3::Zero();
};

struct SparsePoint {
    std::uint64_t id = 0;
    Vec3 position = Vec3::Zero();
    std::optional<std::array<std::uint8_t, 3>> color;
    std::optional<double> error;
};

struct SparsePointCloud {
    std::vector<SparsePoint> points;
};

struct View {
    int image_id = 0;
    std::string image_name;
    int camera_id = 0;
    CameraPose pose;
};

struct Reconstruction {
    std::map<int, PinholeIntrinsics> intrinsics;
    std::vector<View> views;
    SparsePointCloud cloud;

    const PinholeIntrinsics& intrinsics_for(const View& v) const;
    void validate() const;
};

// Quaternion (w,x,y,z) to rotation matrix; normalizes first.
// Throws ParseError on a non-normalizable quaternion.
Mat3 quaternion_to_rotation(double w, double x, double y, double z);

// Inverse helper for serialization: camera-to-world pose back to the
// world-to-camera (q, t) storage convention.
void pose_to_world_to_camera(const CameraPose& pose, Eigen::Vector4d& q_wxyz, Vec3& t);

std::map<int, PinholeIntrinsics> parse_cameras(std::istream& in);
std::vector<View> parse_images(std::istream& in);
SparsePointCloud parse_points3d(std::istream& in);

Reconstruction load_reconstruction(const std::filesystem::path& dir);
void save_reconstruction(const Reconstruction& recon, const std::filesystem::path& dir);

void write_cameras(const std::map<int, PinholeIntrinsics>& cams, std::ostream& out);
void write_images(const std::vector<View>& views, std::ostream& out);
void write_points3d(const SparsePointCloud& cloud, std::ostream& out);

}  // namespace birdplan

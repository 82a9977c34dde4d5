#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "birdplan/sparse_io.hpp"

namespace birdplan {

struct ClusterAssignment {
    std::vector<int> labels;   // per-point cluster index in [0, K)
    std::vector<Vec3> centers;
};

struct SubScene {
    int id = 0;
    std::vector<int> member_ids;  // image ids, ordered by increasing distance to center
    Vec3 center = Vec3::Zero();
    double base_radius = 0;
    double expanded_radius = 0;
};

// K = ceil(N / target); always in [1, N].
int choose_k(int total_cameras, int target_per_scene);

// Lloyd's algorithm with k-means++ seeding. Converges when no label
// changes or after 100 iterations. Ties go to the lowest center index.
ClusterAssignment kmeans(const std::vector<Vec3>& positions, int k, std::uint64_t seed);

constexpr int kNoCap = std::numeric_limits<int>::max();

// Grow each cluster to radius sigma * d_k and absorb every camera inside,
// keeping at most max_n members (farthest non-original members dropped).
std::vector<SubScene> expand_clusters(const ClusterAssignment& assignment,
                                      const std::vector<Vec3>& positions,
                                      const std::vector<int>& image_ids, double sigma,
                                      int max_n);

}  // namespace birdplan

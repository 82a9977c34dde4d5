#include "birdplan/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "birdplan/errors.hpp"

namespace birdplan {

int choose_k(int total_cameras, int target_per_scene) {
    if (total_cameras < 1 || target_per_scene < 1)
        throw ValidationError("choose_k: counts must be positive");
    int k = (total_cameras + target_per_scene - 1) / target_per_scene;
    return std::min(std::max(k, 1), total_cameras);
}

namespace {

int nearest_center(const Vec3& p, const std::vector<Vec3>& centers) {
    int best = 0;
    double best_d = (p - centers[0]).squaredNorm();
    for (int i = 1; i < static_cast<int>(centers.size()); ++i) {
        double d = (p - centers[i]).squaredNorm();
        if (d < best_d) {  // ties keep the lowest index
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<Vec3> kmeanspp_seed(const std::vector<Vec3>& pts, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Vec3> centers;
    centers.reserve(k);
    std::uniform_int_distribution<std::size_t> first(0, pts.size() - 1);
    centers.push_back(pts[first(rng)]);
    std::vector<double> d2(pts.size());
    while (static_cast<int>(centers.size()) < k) {
        double total = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double d = (pts[i] - centers.back()).squaredNorm();
            if (centers.size() == 1 || d < d2[i]) d2[i] = d;
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng), acc = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                acc += d2[i];
                if (acc >= r) { pick = i; break; }
            }
            // numeric slack: make sure we picked a point at positive distance
            if (d2[pick] == 0) {
                for (std::size_t i = 0; i < pts.size(); ++i)
                    if (d2[i] > 0) { pick = i; break; }
            }
        }
        centers.push_back(pts[pick]);
    }
    return centers;
}

}  // namespace

ClusterAssignment kmeans(const std::vector<Vec3>& positions, int k, std::uint64_t seed) {
    if (k < 1) throw ValidationError("kmeans: k must be >= 1");
    if (positions.empty()) throw ValidationError("kmeans: no positions");
    std::set<std::array<double, 3>> distinct;
    for (const auto& p : positions) distinct.insert({p.x(), p.y(), p.z()});
    if (static_cast<std::size_t>(k) > distinct.size())
        throw DegenerateClustering("kmeans: k=" + std::to_string(k) + " exceeds " +
                                   std::to_string(distinct.size()) + " distinct positions");

    ClusterAssignment a;
    a.centers = kmeanspp_seed(positions, k, seed);
    a.labels.assign(positions.size(), -1);

    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < positions.size(); ++i) {
            int l = nearest_center(positions[i], a.centers);
            if (l != a.labels[i]) { a.labels[i] = l; changed = true; }
        }
        // repair empty clusters by stealing the globally farthest point
        std::vector<int> counts(k, 0);
        for (int l : a.labels) ++counts[l];
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t steal = positions.size();
            double worst = -1;
            for (std::size_t i = 0; i < positions.size(); ++i) {
                if (counts[a.labels[i]] <= 1) continue;
                double d = (positions[i] - a.centers[a.labels[i]]).squaredNorm();
                if (d > worst) { worst = d; steal = i; }
            }
            if (steal == positions.size())
                throw DegenerateClustering("kmeans: cannot populate cluster " + std::to_string(c));
            --counts[a.labels[steal]];
            a.labels[steal] = c;
            ++counts[c];
            changed = true;
        }
        if (!changed && iter > 0) break;
        // recompute centers
        std::vector<Vec3> sums(k, Vec3::Zero());
        for (std::size_t i = 0; i < positions.size(); ++i) sums[a.labels[i]] += positions[i];
        for (int c = 0; c < k; ++c) a.centers[c] = sums[c] / counts[c];
        if (!changed) break;
    }
    return a;
}

std::vector<SubScene> expand_clusters(const ClusterAssignment& assignment,
                                      const std::vector<Vec3>& positions,
                                      const std::vector<int>& image_ids, double sigma,
                                      int max_n) {
    const std::size_t n = positions.size();
    if (assignment.labels.size() != n || image_ids.size() != n)
        throw ValidationError("expand_clusters: size mismatch");
    if (sigma < 1.0) throw ValidationError("expand_clusters: sigma must be >= 1");
    const int k = static_cast<int>(assignment.centers.size());

    std::vector<SubScene> scenes(k);
    for (int c = 0; c < k; ++c) {
        const Vec3& center = assignment.centers[c];
        double d_k = 0;
        int base_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (assignment.labels[i] != c) continue;
            ++base_count;
            d_k = std::max(d_k, (positions[i] - center).norm());
        }
        if (base_count > max_n)
            throw CapacityError("cluster " + std::to_string(c) + " holds " +
                                std::to_string(base_count) + " cameras, cap is " +
                                std::to_string(max_n));
        double d_exp = sigma * d_k;

        struct Member { int image_id; double dist; bool original; };
        std::vector<Member> members;
        for (std::size_t i = 0; i < n; ++i) {
            double d = (positions[i] - center).norm();
            bool original = assignment.labels[i] == c;
            if (original || d < d_exp)
                members.push_back({image_ids[i], d, original});
        }
        std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            return a.image_id < b.image_id;
        });
        // over cap: drop farthest non-original members
        while (static_cast<int>(members.size()) > max_n) {
            auto it = std::find_if(members.rbegin(), members.rend(),
                                   [](const Member& m) { return !m.original; });
            if (it == members.rend()) break;  // cannot happen, base_count <= max_n
            members.erase(std::next(it).base());
        }

        SubScene& s = scenes[c];
        s.id = c;
        s.center = center;
        s.base_radius = d_k;
        s.expanded_radius = d_exp;
        s.member_ids.reserve(members.size());
        for (const auto& m : members) s.member_ids.push_back(m.image_id);
    }
    return scenes;
}

}  // namespace birdplan

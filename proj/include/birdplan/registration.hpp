#pragma once

#include <string>
#include <vector>

#include "birdplan/ground_geometry.hpp"

namespace birdplan {

enum class PlanMode { StitchFree, StitchRequired };

struct RenderPlan {
    std::string query_image_id;
    FootprintRect query_footprint;
    PlanMode mode = PlanMode::StitchFree;
    std::vector<int> subscene_ids;  // StitchFree -> exactly one id
};

struct IndexEntry {
    int subscene_id = 0;
    FootprintRect rect;
    Vec3 center = Vec3::Zero();  // cluster center, used for the stitch-free pick
};

// Closed-rectangle tests; touching edges count.
bool rect_intersects(const FootprintRect& a, const FootprintRect& b);
bool rect_contains(const FootprintRect& outer, const FootprintRect& inner);

FootprintRect rect_intersection(const FootprintRect& a, const FootprintRect& b);

RenderPlan register_query(const std::string& query_image_id, const PinholeIntrinsics& intr,
                          const CameraPose& pose, const GroundPlane& plane,
                          const std::vector<IndexEntry>& index);

}  // namespace birdplan

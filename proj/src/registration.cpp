#include "birdplan/registration.hpp"

#include <algorithm>

#include "birdplan/errors.hpp"

namespace birdplan {

bool rect_intersects(const FootprintRect& a, const FootprintRect& b) {
    return a.min_u <= b.max_u && b.min_u <= a.max_u && a.min_v <= b.max_v && b.min_v <= a.max_v;
}

bool rect_contains(const FootprintRect& outer, const FootprintRect& inner) {
    return outer.min_u <= inner.min_u && inner.max_u <= outer.max_u &&
           outer.min_v <= inner.min_v && inner.max_v <= outer.max_v;
}

FootprintRect rect_intersection(const FootprintRect& a, const FootprintRect& b) {
    return {std::max(a.min_u, b.min_u), std::min(a.max_u, b.max_u),
            std::max(a.min_v, b.min_v), std::min(a.max_v, b.max_v)};
}

RenderPlan register_query(const std::string& query_image_id, const PinholeIntrinsics& intr,
                          const CameraPose& pose, const GroundPlane& plane,
                          const std::vector<IndexEntry>& index) {
    RenderPlan plan;
    plan.query_image_id = query_image_id;
    plan.query_footprint = camera_footprint(intr, pose, plane);

    struct Hit { const IndexEntry* entry; double overlap_area; bool contains; };
    std::vector<Hit> hits;
    for (const auto& e : index) {
        if (!rect_intersects(e.rect, plan.query_footprint)) continue;
        FootprintRect ov = rect_intersection(e.rect, plan.query_footprint);
        hits.push_back({&e, ov.area(), rect_contains(e.rect, plan.query_footprint)});
    }
    if (hits.empty())
        throw OutOfCoverage("query '" + query_image_id + "' intersects no sub-scene footprint");

    const IndexEntry* pick = nullptr;
    double pick_dist = 0;
    for (const auto& h : hits) {
        if (!h.contains) continue;
        double d = (h.entry->center - pose.center).norm();
        if (!pick || d < pick_dist || (d == pick_dist && h.entry->subscene_id < pick->subscene_id)) {
            pick = h.entry;
            pick_dist = d;
        }
    }
    if (pick) {
        plan.mode = PlanMode::StitchFree;
        plan.subscene_ids = {pick->subscene_id};
        return plan;
    }

    plan.mode = PlanMode::StitchRequired;
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.overlap_area != b.overlap_area) return a.overlap_area > b.overlap_area;
        return a.entry->subscene_id < b.entry->subscene_id;
    });
    for (const auto& h : hits) plan.subscene_ids.push_back(h.entry->subscene_id);
    return plan;
}

}  // namespace birdplan

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "birdplan/config.hpp"
#include "birdplan/orchestration.hpp"
#include "birdplan/registration.hpp"
#include "birdplan/stitching.hpp"

namespace birdplan {

// ---- artifact documents ---------------------------------------------------

struct Partition {
    std::vector<SubScene> subscenes;
    PipelineConfig config;
    std::string config_hash;
};

struct FootprintIndex {
    GroundPlane plane;
    std::vector<std::pair<int, FootprintRect>> camera_rects;  // image_id -> rect
    std::vector<IndexEntry> subscene_rects;
    std::string config_hash;
};

struct QueryCamera {
    std::string id;
    PinholeIntrinsics intrinsics;
    CameraPose pose;  // camera-to-world
};

struct PlanSet {
    std::vector<RenderPlan> plans;
    std::vector<QueryCamera> queries;  // parallel to plans
    std::string config_hash;
};

/// Synthetic render engine scene description (texture over a world window).
struct SceneSpec {
    std::filesystem::path texture_path;
    FootprintRect world_window;
    double blur_radius = 8.0;
};

void save_partition(const Partition& p, const std::filesystem::path& path);
Partition load_partition(const std::filesystem::path& path);

void save_index(const FootprintIndex& idx, const std::filesystem::path& path);
FootprintIndex load_index(const std::filesystem::path& path);

std::vector<QueryCamera> load_queries(const std::filesystem::path& path,
                                      const Reconstruction* recon = nullptr);

void save_plans(const PlanSet& plans, const std::filesystem::path& path);
PlanSet load_plans(const std::filesystem::path& path);

void save_scene_spec(const SceneSpec& scene, const std::filesystem::path& path);
SceneSpec load_scene_spec(const std::filesystem::path& path);

// ---- pipeline stages ------------------------------------------------------

Partition stage_decompose(const Reconstruction& recon, const PipelineConfig& cfg);

FootprintIndex stage_index(const Reconstruction& recon, const Partition& partition,
                           const PipelineConfig& cfg);

PlanSet stage_plan(const std::vector<QueryCamera>& queries, const FootprintIndex& index,
                   const PipelineConfig& cfg);

std::vector<SubSceneModel> stage_train(const Reconstruction& recon, const Partition& partition,
                                       const FootprintIndex& index, const PipelineConfig& cfg,
                                       const SceneSpec* scene,
                                       const std::filesystem::path& artifact_dir,
                                       const std::filesystem::path& manifest_path,
                                       const JobHooks& hooks = {});

// Renders every (query, sub-scene) pair a plan requires into
// out_dir/<query_id>/subscene_<id>.png.
void stage_render(const PlanSet& plans, const std::vector<SubSceneModel>& models,
                  RenderEngine& engine, const std::filesystem::path& out_dir);

// Stitches renders into out_dir/<query_id>.png plus a JSON report.
void stage_stitch(const PlanSet& plans, const std::filesystem::path& renders_dir,
                  const PipelineConfig& cfg, const std::filesystem::path& out_dir);

struct EvalRow {
    std::string name;
    double psnr = 0;
    double ssim = 0;
};

struct EvalSummary {
    std::vector<EvalRow> rows;
    double psnr_min = 0, psnr_max = 0, psnr_avg = 0;
    double ssim_min = 0, ssim_max = 0, ssim_avg = 0;
};

EvalSummary stage_eval(const std::filesystem::path& rendered_dir,
                       const std::filesystem::path& truth_dir);

void check_config_hash(const std::string& artifact_hash, const PipelineConfig& cfg,
                       const std::string& artifact_name);

}  // namespace birdplan

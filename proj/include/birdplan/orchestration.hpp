#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "birdplan/decomposition.hpp"
#include "birdplan/ground_geometry.hpp"
#include "birdplan/image.hpp"

namespace birdplan {

enum class ModelStatus { Pending, Trained, Failed };

struct SubSceneModel {
    int subscene_id = 0;
    std::string engine_kind = "synthetic";  // "synthetic" | "external"
    std::filesystem::path artifact_path;
    int training_iterations = 5000;
    std::vector<int> image_ids;
    FootprintRect footprint;
    ModelStatus status = ModelStatus::Pending;
    std::string error;  // set when status == Failed
};

struct RenderRequest {
    PinholeIntrinsics intrinsics;
    CameraPose pose;
    int out_width = 0;
    int out_height = 0;

    void validate() const;
};

struct TrainingConfig {
    int iterations = 5000;
    std::string engine_kind = "synthetic";
};

std::vector<SubSceneModel> build_training_jobs(const Reconstruction& recon,
                                               const std::vector<SubScene>& subscenes,
                                               const std::vector<FootprintRect>& footprints,
                                               const TrainingConfig& config,
                                               const std::filesystem::path& artifact_dir);

// ---- render engines -------------------------------------------------------

class RenderEngine {
public:
    virtual ~RenderEngine() = default;
    // Produces the model artifact; throws on failure.
    virtual void train(SubSceneModel& job, const Reconstruction& recon) = 0;
    virtual RasterImage render(const SubSceneModel& model, const RenderRequest& req) = 0;
};

// Deterministic verification engine: a textured ground plane, rendered
// sharp inside the model's footprint and Gaussian-blurred outside it.
class SyntheticEngine : public RenderEngine {
public:
    SyntheticEngine(RasterImage texture, GroundPlane plane, FootprintRect world_window,
                    double blur_radius);

    void train(SubSceneModel& job, const Reconstruction& recon) override;
    RasterImage render(const SubSceneModel& model, const RenderRequest& req) override;

    // Full-coverage render, used as the ground-truth oracle.
    RasterImage render_reference(const RenderRequest& req) const;

    const GroundPlane& plane() const { return plane_; }

private:
    ImageF render_view(const RenderRequest& req, const std::optional<FootprintRect>& valid) const;

    ImageF sharp_;
    ImageF blurred_;
    GroundPlane plane_;
    FootprintRect window_;
    double blur_radius_;
};

// Adapter for an out-of-process trainer. Writes a per-sub-scene dataset
// (transforms.json + image list) and invokes the configured command with
// {dataset_dir} {artifact_path} {iterations} substituted.
class ExternalEngine : public RenderEngine {
public:
    ExternalEngine(std::string command_template, std::filesystem::path work_dir,
                   std::optional<std::filesystem::path> images_dir = std::nullopt);

    void train(SubSceneModel& job, const Reconstruction& recon) override;
    RasterImage render(const SubSceneModel& model, const RenderRequest& req) override;

    std::filesystem::path write_dataset(const SubSceneModel& job,
                                        const Reconstruction& recon) const;

private:
    std::string command_template_;
    std::filesystem::path work_dir_;
    std::optional<std::filesystem::path> images_dir_;
};

// ---- job scheduling -------------------------------------------------------

struct JobHooks {
    std::function<void(const SubSceneModel&)> on_start;
    std::function<void(const SubSceneModel&)> on_finish;
};

void save_manifest(const std::vector<SubSceneModel>& models, const std::filesystem::path& path,
                   const std::string& config_hash);
std::vector<SubSceneModel> load_manifest(const std::filesystem::path& path,
                                         std::string* config_hash = nullptr);

// Bounded worker pool. Already-trained jobs are skipped; a failing job is
// recorded on its manifest entry and does not abort the others. The
// manifest file is rewritten after every status transition.
void run_jobs(std::vector<SubSceneModel>& jobs, int parallelism, RenderEngine& engine,
              const Reconstruction& recon, const std::filesystem::path& manifest_path,
              const std::string& config_hash, const JobHooks& hooks = {});

RasterImage render(RenderEngine& engine, const SubSceneModel& model, const RenderRequest& req);

// Standalone synthetic render, texture mapped affinely over world_window.
RasterImage synthetic_render(const RasterImage& texture, const GroundPlane& plane,
                             const RenderRequest& req, const FootprintRect& world_window,
                             const FootprintRect& valid_region, double blur_radius);

}  // namespace birdplan

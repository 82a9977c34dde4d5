#include "birdplan/orchestration.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

namespace birdplan {

using nlohmann::json;

void RenderRequest::validate() const {
    intrinsics.validate();
    if (out_width != intrinsics.width || out_height != intrinsics.height)
        throw ValidationError("render request dimensions do not match intrinsics");
}

std::vector<SubSceneModel> build_training_jobs(const Reconstruction& recon,
                                               const std::vector<SubScene>& subscenes,
                                               const std::vector<FootprintRect>& footprints,
                                               const TrainingConfig& config,
                                               const std::filesystem::path& artifact_dir) {
    if (config.iterations < 1)
        throw ValidationError("training iterations must be >= 1");
    if (footprints.size() != subscenes.size())
        throw ConsistencyError("one footprint per sub-scene required");
    std::vector<SubSceneModel> jobs;
    jobs.reserve(subscenes.size());
    for (std::size_t i = 0; i < subscenes.size(); ++i) {
        const SubScene& s = subscenes[i];
        if (s.member_ids.empty())
            throw EmptySubScene("sub-scene " + std::to_string(s.id) + " has no members");
        for (int id : s.member_ids) {
            bool found = false;
            for (const auto& v : recon.views)
                if (v.image_id == id) { found = true; break; }
            if (!found)
                throw ConsistencyError("sub-scene member image " + std::to_string(id) +
                                       " not in reconstruction");
        }
        SubSceneModel m;
        m.subscene_id = s.id;
        m.engine_kind = config.engine_kind;
        m.artifact_path = artifact_dir / ("subscene_" + std::to_string(s.id) + ".model");
        m.training_iterations = config.iterations;
        m.image_ids = s.member_ids;
        m.footprint = footprints[i];
        jobs.push_back(std::move(m));
    }
    return jobs;
}

// ---- manifest -------------------------------------------------------------

namespace {

const char* status_name(ModelStatus s) {
    switch (s) {
        case ModelStatus::Pending: return "pending";
        case ModelStatus::Trained: return "trained";
        case ModelStatus::Failed: return "failed";
    }
    return "pending";
}

ModelStatus status_from(const std::string& s) {
    if (s == "trained") return ModelStatus::Trained;
    if (s == "failed") return ModelStatus::Failed;
    return ModelStatus::Pending;
}

json rect_to_json(const FootprintRect& r) {
    return {{"min_u", r.min_u}, {"min_v", r.min_v}, {"max_u", r.max_u}, {"max_v", r.max_v}};
}

FootprintRect rect_from_json(const json& j) {
    return {j.at("min_u").get<double>(), j.at("max_u").get<double>(),
            j.at("min_v").get<double>(), j.at("max_v").get<double>()};
}

}  // namespace

void save_manifest(const std::vector<SubSceneModel>& models, const std::filesystem::path& path,
                   const std::string& config_hash) {
    json j;
    j["schema_version"] = 1;
    j["config_hash"] = config_hash;
    j["models"] = json::array();
    for (const auto& m : models) {
        j["models"].push_back({{"subscene_id", m.subscene_id},
                               {"engine_kind", m.engine_kind},
                               {"artifact_path", m.artifact_path.string()},
                               {"training_iterations", m.training_iterations},
                               {"image_ids", m.image_ids},
                               {"footprint", rect_to_json(m.footprint)},
                               {"status", status_name(m.status)},
                               {"error", m.error}});
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::vector<SubSceneModel> load_manifest(const std::filesystem::path& path,
                                         std::string* config_hash) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open manifest " + path.string());
    json j = json::parse(in);
    if (config_hash) *config_hash = j.value("config_hash", "");
    std::vector<SubSceneModel> out;
    for (const auto& e : j.at("models")) {
        SubSceneModel m;
        m.subscene_id = e.at("subscene_id").get<int>();
        m.engine_kind = e.at("engine_kind").get<std::string>();
        m.artifact_path = e.at("artifact_path").get<std::string>();
        m.training_iterations = e.at("training_iterations").get<int>();
        m.image_ids = e.at("image_ids").get<std::vector<int>>();
        m.footprint = rect_from_json(e.at("footprint"));
        m.status = status_from(e.at("status").get<std::string>());
        m.error = e.value("error", "");
        // stale manifests may claim an artifact that is gone
        if (m.status == ModelStatus::Trained && !std::filesystem::exists(m.artifact_path))
            m.status = ModelStatus::Pending;
        out.push_back(std::move(m));
    }
    return out;
}

// ---- scheduler ------------------------------------------------------------

void run_jobs(std::vector<SubSceneModel>& jobs, int parallelism, RenderEngine& engine,
              const Reconstruction& recon, const std::filesystem::path& manifest_path,
              const std::string& config_hash, const JobHooks& hooks) {
    if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
    if (!manifest_path.empty()) {
        if (manifest_path.has_parent_path())
            std::filesystem::create_directories(manifest_path.parent_path());
        save_manifest(jobs, manifest_path, config_hash);
    }

    std::mutex mu;  // guards job state, hooks and manifest writes
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            {
                std::lock_guard lock(mu);
                if (jobs[i].status == ModelStatus::Trained) continue;
                if (hooks.on_start) hooks.on_start(jobs[i]);
            }
            ModelStatus result;
            std::string error;
            try {
                engine.train(jobs[i], recon);
                result = ModelStatus::Trained;
            } catch (const std::exception& e) {
                result = ModelStatus::Failed;
                error = e.what();
            }
            {
                std::lock_guard lock(mu);
                jobs[i].status = result;
                jobs[i].error = error;
                if (hooks.on_finish) hooks.on_finish(jobs[i]);
                if (!manifest_path.empty()) save_manifest(jobs, manifest_path, config_hash);
            }
        }
    };

    int n_threads = std::min<int>(parallelism, static_cast<int>(jobs.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
}

RasterImage render(RenderEngine& engine, const SubSceneModel& model, const RenderRequest& req) {
    if (model.status != ModelStatus::Trained)
        throw ModelNotReady("sub-scene " + std::to_string(model.subscene_id) + " is not trained");
    req.validate();
    return engine.render(model, req);
}

// ---- synthetic engine -----------------------------------------------------

SyntheticEngine::SyntheticEngine(RasterImage texture, GroundPlane plane,
                                 FootprintRect world_window, double blur_radius)
    : sharp_(to_float(texture)),
      blurred_(gaussian_blur(sharp_, blur_radius)),
      plane_(std::move(plane)),
      window_(world_window),
      blur_radius_(blur_radius) {
    if (texture.empty()) throw ValidationError("synthetic engine: empty texture");
    if (blur_radius < 0) throw ValidationError("synthetic engine: negative blur radius");
    if (window_.width() <= 0 || window_.height() <= 0)
        throw ValidationError("synthetic engine: empty world window");
}

void SyntheticEngine::train(SubSceneModel& job, const Reconstruction&) {
    if (job.artifact_path.has_parent_path())
        std::filesystem::create_directories(job.artifact_path.parent_path());
    json j = {{"subscene_id", job.subscene_id},
              {"valid_region", rect_to_json(job.footprint)},
              {"blur_radius", blur_radius_},
              {"iterations", job.training_iterations}};
    std::ofstream out(job.artifact_path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write artifact " + job.artifact_path.string());
}

ImageF SyntheticEngine::render_view(const RenderRequest& req,
                                    const std::optional<FootprintRect>& valid) const {
    const auto& intr = req.intrinsics;
    ImageF out(req.out_width, req.out_height);
    const double su = (sharp_.width - 1) / window_.width();
    const double sv = (sharp_.height - 1) / window_.height();
    for (int y = 0; y < req.out_height; ++y) {
        for (int x = 0; x < req.out_width; ++x) {
            Vec3 dir_cam((x + 0.5 - intr.cx) / intr.fx, (y + 0.5 - intr.cy) / intr.fy, 1.0);
            Vec3 through = project_to_world(req.pose, dir_cam);
            float* px = out.at(x, y);
            double u, v;
            try {
                std::tie(u, v) = ray_plane_intersect(req.pose.center, through, plane_);
            } catch (const Error&) {
                px[0] = px[1] = px[2] = 128.f;  // ray miss
                continue;
            }
            double tx = (u - window_.min_u) * su;
            double ty = (v - window_.min_v) * sv;
            bool sharp = !valid || (u >= valid->min_u && u <= valid->max_u &&
                                    v >= valid->min_v && v <= valid->max_v);
            bilinear_sample(sharp ? sharp_ : blurred_, tx, ty, px);
        }
    }
    return out;
}

RasterImage SyntheticEngine::render(const SubSceneModel& model, const RenderRequest& req) {
    return quantize(render_view(req, model.footprint));
}

RasterImage SyntheticEngine::render_reference(const RenderRequest& req) const {
    req.validate();
    return quantize(render_view(req, std::nullopt));
}

RasterImage synthetic_render(const RasterImage& texture, const GroundPlane& plane,
                             const RenderRequest& req, const FootprintRect& world_window,
                             const FootprintRect& valid_region, double blur_radius) {
    req.validate();
    SyntheticEngine engine(texture, plane, world_window, blur_radius);
    SubSceneModel model;
    model.footprint = valid_region;
    model.status = ModelStatus::Trained;
    return engine.render(model, req);
}

// ---- external engine ------------------------------------------------------

ExternalEngine::ExternalEngine(std::string command_template, std::filesystem::path work_dir,
                               std::optional<std::filesystem::path> images_dir)
    : command_template_(std::move(command_template)),
      work_dir_(std::move(work_dir)),
      images_dir_(std::move(images_dir)) {}

namespace {
void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
}
}  // namespace

std::filesystem::path ExternalEngine::write_dataset(const SubSceneModel& job,
                                                    const Reconstruction& recon) const {
    auto dataset_dir = work_dir_ / ("subscene_" + std::to_string(job.subscene_id));
    std::filesystem::create_directories(dataset_dir / "images");

    json frames = json::array();
    for (int image_id : job.image_ids) {
        for (const auto& v : recon.views) {
            if (v.image_id != image_id) continue;
            Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
            m.block<3, 3>(0, 0) = v.pose.rotation;
            m.block<3, 1>(0, 3) = v.pose.center;
            json rows = json::array();
            for (int r = 0; r < 4; ++r)
                rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
            frames.push_back({{"file_path", "images/" + v.image_name},
                              {"transform_matrix", rows}});
            if (images_dir_) {
                auto src = *images_dir_ / v.image_name;
                if (std::filesystem::exists(src))
                    std::filesystem::copy_file(
                        src, dataset_dir / "images" / v.image_name,
                        std::filesystem::copy_options::overwrite_existing);
            }
        }
    }
    const PinholeIntrinsics& intr = recon.intrinsics.begin()->second;
    json transforms = {{"w", intr.width},
                       {"h", intr.height},
                       {"fl_x", intr.fx},
                       {"fl_y", intr.fy},
                       {"cx", intr.cx},
                       {"cy", intr.cy},
                       {"camera_angle_x", 2.0 * std::atan(0.5 * intr.width / intr.fx)},
                       {"frames", frames}};
    std::ofstream out(dataset_dir / "transforms.json");
    out << transforms.dump(2) << '\n';
    return dataset_dir;
}

void ExternalEngine::train(SubSceneModel& job, const Reconstruction& recon) {
    auto dataset_dir = write_dataset(job, recon);
    if (job.artifact_path.has_parent_path())
        std::filesystem::create_directories(job.artifact_path.parent_path());

    std::string cmd = command_template_;
    replace_all(cmd, "{dataset_dir}", dataset_dir.string());
    replace_all(cmd, "{artifact_path}", job.artifact_path.string());
    replace_all(cmd, "{iterations}", std::to_string(job.training_iterations));
    auto log_path = dataset_dir / "train.log";
    cmd += " > " + log_path.string() + " 2>&1";

    int rc = std::system(cmd.c_str());
    if (rc != 0)
        throw Error("EngineUnavailable: trainer command exited with status " +
                    std::to_string(rc) + ", see " + log_path.string());
    if (!std::filesystem::exists(job.artifact_path))
        throw Error("EngineUnavailable: trainer produced no artifact at " +
                    job.artifact_path.string());
}

RasterImage ExternalEngine::render(const SubSceneModel& model, const RenderRequest&) {
    throw Error("external engine renders out of process; no render command configured for "
                "sub-scene " + std::to_string(model.subscene_id));
}

}  // namespace birdplan

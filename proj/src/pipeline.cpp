#include "birdplan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

namespace birdplan {

using nlohmann::json;

namespace {

json vec3_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 vec3_from_json(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

json rect_to_json(const FootprintRect& r) {
    return {{"min_u", r.min_u}, {"min_v", r.min_v}, {"max_u", r.max_u}, {"max_v", r.max_v}};
}

FootprintRect rect_from_json(const json& j) {
    return {j.at("min_u").get<double>(), j.at("max_u").get<double>(),
            j.at("min_v").get<double>(), j.at("max_v").get<double>()};
}

json intr_to_json(const PinholeIntrinsics& c) {
    return {{"camera_id", c.camera_id}, {"width", c.width},   {"height", c.height},
            {"fx", c.fx},               {"fy", c.fy},         {"cx", c.cx},
            {"cy", c.cy}};
}

PinholeIntrinsics intr_from_json(const json& j) {
    PinholeIntrinsics c;
    c.camera_id = j.value("camera_id", 0);
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.validate();
    return c;
}

json pose_to_json(const CameraPose& p) {
    Eigen::Quaterniond q(p.rotation);
    if (q.w() < 0) q.coeffs() *= -1;
    return {{"quaternion", {q.w(), q.x(), q.y(), q.z()}}, {"center", vec3_to_json(p.center)}};
}

CameraPose pose_from_json(const json& j) {
    CameraPose p;
    const auto& q = j.at("quaternion");
    p.rotation = quaternion_to_rotation(q.at(0), q.at(1), q.at(2), q.at(3));
    p.center = vec3_from_json(j.at("center"));
    return p;
}

void write_file(const json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw Error("cannot write " + path.string());
}

json read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open " + path.string());
    return json::parse(in);
}

}  // namespace

void check_config_hash(const std::string& artifact_hash, const PipelineConfig& cfg,
                       const std::string& artifact_name) {
    if (artifact_hash != cfg.hash())
        throw StaleArtifact(artifact_name + " was produced under a different config (hash " +
                            artifact_hash + " vs " + cfg.hash() + ")");
}

// ---- partition ------------------------------------------------------------

void save_partition(const Partition& p, const std::filesystem::path& path) {
    json subs = json::array();
    for (const auto& s : p.subscenes)
        subs.push_back({{"id", s.id},
                        {"center", vec3_to_json(s.center)},
                        {"base_radius", s.base_radius},
                        {"expanded_radius", s.expanded_radius},
                        {"member_image_ids", s.member_ids}});
    json j = {{"schema_version", 1},
              {"config_hash", p.config_hash},
              {"config",
               {{"seed", p.config.seed},
                {"sigma", p.config.sigma},
                {"target_per_scene", p.config.target_per_scene},
                {"maxN", p.config.max_n}}},
              {"subscenes", subs}};
    write_file(j, path);
}

Partition load_partition(const std::filesystem::path& path) {
    json j = read_file(path);
    Partition p;
    p.config_hash = j.value("config_hash", "");
    p.config.seed = j.at("config").at("seed").get<std::uint64_t>();
    p.config.sigma = j.at("config").at("sigma").get<double>();
    p.config.target_per_scene = j.at("config").at("target_per_scene").get<int>();
    p.config.max_n = j.at("config").at("maxN").get<int>();
    for (const auto& e : j.at("subscenes")) {
        SubScene s;
        s.id = e.at("id").get<int>();
        s.center = vec3_from_json(e.at("center"));
        s.base_radius = e.at("base_radius").get<double>();
        s.expanded_radius = e.at("expanded_radius").get<double>();
        s.member_ids = e.at("member_image_ids").get<std::vector<int>>();
        p.subscenes.push_back(std::move(s));
    }
    return p;
}

// ---- footprint index ------------------------------------------------------

void save_index(const FootprintIndex& idx, const std::filesystem::path& path) {
    json footprints = json::array();
    for (const auto& [id, rect] : idx.camera_rects) {
        json e = rect_to_json(rect);
        e["owner_kind"] = "camera";
        e["owner_id"] = id;
        footprints.push_back(std::move(e));
    }
    for (const auto& e : idx.subscene_rects) {
        json o = rect_to_json(e.rect);
        o["owner_kind"] = "subscene";
        o["owner_id"] = e.subscene_id;
        o["center"] = vec3_to_json(e.center);
        footprints.push_back(std::move(o));
    }
    json j = {{"schema_version", 1},
              {"config_hash", idx.config_hash},
              {"plane",
               {{"normal", vec3_to_json(idx.plane.normal)},
                {"offset", idx.plane.offset},
                {"basis_u", vec3_to_json(idx.plane.basis_u)},
                {"basis_v", vec3_to_json(idx.plane.basis_v)}}},
              {"footprints", footprints}};
    write_file(j, path);
}

FootprintIndex load_index(const std::filesystem::path& path) {
    json j = read_file(path);
    FootprintIndex idx;
    idx.config_hash = j.value("config_hash", "");
    const auto& pl = j.at("plane");
    idx.plane.normal = vec3_from_json(pl.at("normal"));
    idx.plane.offset = pl.at("offset").get<double>();
    idx.plane.basis_u = vec3_from_json(pl.at("basis_u"));
    idx.plane.basis_v = vec3_from_json(pl.at("basis_v"));
    for (const auto& e : j.at("footprints")) {
        std::string kind = e.at("owner_kind").get<std::string>();
        if (kind == "camera") {
            idx.camera_rects.emplace_back(e.at("owner_id").get<int>(), rect_from_json(e));
        } else if (kind == "subscene") {
            IndexEntry entry;
            entry.subscene_id = e.at("owner_id").get<int>();
            entry.rect = rect_from_json(e);
            if (e.contains("center")) entry.center = vec3_from_json(e.at("center"));
            idx.subscene_rects.push_back(std::move(entry));
        } else {
            throw ParseError("unknown footprint owner_kind '" + kind + "'");
        }
    }
    return idx;
}

// ---- queries and plans ----------------------------------------------------

std::vector<QueryCamera> load_queries(const std::filesystem::path& path,
                                      const Reconstruction* recon) {
    json j = read_file(path);
    std::vector<QueryCamera> out;
    for (const auto& e : j.at("queries")) {
        QueryCamera q;
        if (e.contains("image_id")) {
            if (!recon)
                throw ValidationError("query references a reconstruction image but none was given");
            int image_id = e.at("image_id").get<int>();
            auto it = std::find_if(recon->views.begin(), recon->views.end(),
                                   [&](const View& v) { return v.image_id == image_id; });
            if (it == recon->views.end())
                throw ConsistencyError("query image_id " + std::to_string(image_id) +
                                       " not in reconstruction");
            q.id = it->image_name;
            q.intrinsics = recon->intrinsics_for(*it);
            q.pose = it->pose;
        } else {
            q.id = e.at("id").get<std::string>();
            q.intrinsics = intr_from_json(e.at("intrinsics"));
            q.pose = pose_from_json(e);
        }
        out.push_back(std::move(q));
    }
    return out;
}

void save_plans(const PlanSet& plans, const std::filesystem::path& path) {
    json arr = json::array();
    for (std::size_t i = 0; i < plans.plans.size(); ++i) {
        const RenderPlan& p = plans.plans[i];
        const QueryCamera& q = plans.queries[i];
        json e = {{"query_image_id", p.query_image_id},
                  {"mode", p.mode == PlanMode::StitchFree ? "stitch_free" : "stitch_required"},
                  {"subscene_ids", p.subscene_ids},
                  {"query_footprint", rect_to_json(p.query_footprint)},
                  {"camera", {{"intrinsics", intr_to_json(q.intrinsics)},
                              {"pose", pose_to_json(q.pose)}}}};
        arr.push_back(std::move(e));
    }
    write_file(json{{"schema_version", 1}, {"config_hash", plans.config_hash}, {"plans", arr}},
               path);
}

PlanSet load_plans(const std::filesystem::path& path) {
    json j = read_file(path);
    PlanSet out;
    out.config_hash = j.value("config_hash", "");
    for (const auto& e : j.at("plans")) {
        RenderPlan p;
        p.query_image_id = e.at("query_image_id").get<std::string>();
        p.mode = e.at("mode").get<std::string>() == "stitch_free" ? PlanMode::StitchFree
                                                                  : PlanMode::StitchRequired;
        p.subscene_ids = e.at("subscene_ids").get<std::vector<int>>();
        p.query_footprint = rect_from_json(e.at("query_footprint"));
        QueryCamera q;
        q.id = p.query_image_id;
        q.intrinsics = intr_from_json(e.at("camera").at("intrinsics"));
        q.pose = pose_from_json(e.at("camera").at("pose"));
        out.plans.push_back(std::move(p));
        out.queries.push_back(std::move(q));
    }
    return out;
}

void save_scene_spec(const SceneSpec& scene, const std::filesystem::path& path) {
    // stored relative to the spec file so the scene directory is relocatable
    std::error_code ec;
    std::filesystem::path tex =
        std::filesystem::proximate(scene.texture_path, path.parent_path(), ec);
    if (ec || tex.empty()) tex = scene.texture_path;
    json j = {{"schema_version", 1},
              {"texture", tex.string()},
              {"world_window", rect_to_json(scene.world_window)},
              {"blur_radius", scene.blur_radius}};
    write_file(j, path);
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
    json j = read_file(path);
    SceneSpec s;
    s.texture_path = j.at("texture").get<std::string>();
    if (s.texture_path.is_relative())
        s.texture_path = path.parent_path() / s.texture_path;
    s.world_window = rect_from_json(j.at("world_window"));
    s.blur_radius = j.at("blur_radius").get<double>();
    return s;
}

// ---- stages ---------------------------------------------------------------

Partition stage_decompose(const Reconstruction& recon, const PipelineConfig& cfg) {
    cfg.validate();
    std::vector<Vec3> positions;
    std::vector<int> image_ids;
    positions.reserve(recon.views.size());
    for (const auto& v : recon.views) {
        positions.push_back(v.pose.center);
        image_ids.push_back(v.image_id);
    }
    if (positions.empty()) throw ValidationError("reconstruction holds no views");
    int k = choose_k(static_cast<int>(positions.size()), cfg.target_per_scene);
    ClusterAssignment assignment = kmeans(positions, k, cfg.seed);
    Partition p;
    p.subscenes = expand_clusters(assignment, positions, image_ids, cfg.sigma, cfg.max_n);
    p.config = cfg;
    p.config_hash = cfg.hash();
    return p;
}

FootprintIndex stage_index(const Reconstruction& recon, const Partition& partition,
                           const PipelineConfig& cfg) {
    check_config_hash(partition.config_hash, cfg, "partition");
    FootprintIndex idx;
    idx.plane = fit_plane(recon.cloud, cfg.trim_fraction);
    for (const auto& v : recon.views)
        idx.camera_rects.emplace_back(
            v.image_id, camera_footprint(recon.intrinsics_for(v), v.pose, idx.plane));
    for (const auto& s : partition.subscenes) {
        IndexEntry e;
        e.subscene_id = s.id;
        e.rect = subscene_footprint(s, recon, idx.plane);
        e.center = s.center;
        idx.subscene_rects.push_back(std::move(e));
    }
    idx.config_hash = cfg.hash();
    return idx;
}

PlanSet stage_plan(const std::vector<QueryCamera>& queries, const FootprintIndex& index,
                   const PipelineConfig& cfg) {
    check_config_hash(index.config_hash, cfg, "footprint index");
    PlanSet out;
    for (const auto& q : queries) {
        out.plans.push_back(
            register_query(q.id, q.intrinsics, q.pose, index.plane, index.subscene_rects));
        out.queries.push_back(q);
    }
    out.config_hash = cfg.hash();
    return out;
}

std::vector<SubSceneModel> stage_train(const Reconstruction& recon, const Partition& partition,
                                       const FootprintIndex& index, const PipelineConfig& cfg,
                                       const SceneSpec* scene,
                                       const std::filesystem::path& artifact_dir,
                                       const std::filesystem::path& manifest_path,
                                       const JobHooks& hooks) {
    check_config_hash(partition.config_hash, cfg, "partition");
    check_config_hash(index.config_hash, cfg, "footprint index");

    std::vector<FootprintRect> footprints;
    for (const auto& s : partition.subscenes) {
        auto it = std::find_if(index.subscene_rects.begin(), index.subscene_rects.end(),
                               [&](const IndexEntry& e) { return e.subscene_id == s.id; });
        if (it == index.subscene_rects.end())
            throw StaleArtifact("footprint index lacks sub-scene " + std::to_string(s.id));
        footprints.push_back(it->rect);
    }

    TrainingConfig tcfg;
    tcfg.iterations = cfg.iterations;
    tcfg.engine_kind = cfg.engine_cmd.empty() ? "synthetic" : "external";
    std::vector<SubSceneModel> jobs =
        build_training_jobs(recon, partition.subscenes, footprints, tcfg, artifact_dir);

    // resume from an existing manifest: trained jobs are not re-run
    if (std::filesystem::exists(manifest_path)) {
        std::string prev_hash;
        auto prev = load_manifest(manifest_path, &prev_hash);
        check_config_hash(prev_hash, cfg, "manifest");
        for (auto& job : jobs)
            for (const auto& old : prev)
                if (old.subscene_id == job.subscene_id && old.status == ModelStatus::Trained)
                    job = old;
    }

    std::unique_ptr<RenderEngine> engine;
    if (tcfg.engine_kind == "synthetic") {
        if (!scene) throw ValidationError("synthetic engine requires a scene spec");
        engine = std::make_unique<SyntheticEngine>(read_png(scene->texture_path), index.plane,
                                                   scene->world_window, scene->blur_radius);
    } else {
        engine = std::make_unique<ExternalEngine>(cfg.engine_cmd, artifact_dir / "datasets");
    }
    run_jobs(jobs, cfg.parallelism, *engine, recon, manifest_path, cfg.hash(), hooks);
    return jobs;
}

void stage_render(const PlanSet& plans, const std::vector<SubSceneModel>& models,
                  RenderEngine& engine, const std::filesystem::path& out_dir) {
    std::map<int, const SubSceneModel*> by_id;
    for (const auto& m : models) by_id[m.subscene_id] = &m;

    for (std::size_t i = 0; i < plans.plans.size(); ++i) {
        const RenderPlan& p = plans.plans[i];
        const QueryCamera& q = plans.queries[i];
        RenderRequest req{q.intrinsics, q.pose, q.intrinsics.width, q.intrinsics.height};
        auto dir = out_dir / p.query_image_id;
        std::filesystem::create_directories(dir);
        for (int id : p.subscene_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end() || it->second->status != ModelStatus::Trained)
                throw StaleArtifact("plan for '" + p.query_image_id +
                                    "' needs untrained sub-scene " + std::to_string(id));
            RasterImage img = render(engine, *it->second, req);
            write_png(img, dir / ("subscene_" + std::to_string(id) + ".png"));
        }
    }
}

void stage_stitch(const PlanSet& plans, const std::filesystem::path& renders_dir,
                  const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    check_config_hash(plans.config_hash, cfg, "plans");
    std::filesystem::create_directories(out_dir);
    for (const auto& p : plans.plans) {
        std::vector<std::pair<int, RasterImage>> renders;
        for (int id : p.subscene_ids) {
            auto path = renders_dir / p.query_image_id / ("subscene_" + std::to_string(id) + ".png");
            if (!std::filesystem::exists(path))
                throw IncompletePlan("missing render " + path.string());
            renders.emplace_back(id, read_png(path));
        }
        StitchReport report;
        RasterImage out = stitch(p, renders, cfg.blur, cfg.blend, &report);
        write_png(out, out_dir / (p.query_image_id + ".png"));

        json inputs = json::array();
        for (const auto& in : report.inputs)
            inputs.push_back({{"subscene_id", in.subscene_id},
                              {"trusted_fraction", in.trusted_fraction},
                              {"gain", in.gain}});
        write_file(json{{"schema_version", 1},
                        {"query_image_id", p.query_image_id},
                        {"inputs", inputs},
                        {"hole_pixels", report.hole_pixels},
                        {"blend_mode", report.blend_mode},
                        {"gain_fallback", report.gain_fallback}},
                   out_dir / (p.query_image_id + ".report.json"));
    }
}

EvalSummary stage_eval(const std::filesystem::path& rendered_dir,
                       const std::filesystem::path& truth_dir) {
    EvalSummary summary;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(rendered_dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw MissingInput("no rendered images in " + rendered_dir.string());

    for (const auto& f : files) {
        auto truth_path = truth_dir / f.filename();
        if (!std::filesystem::exists(truth_path))
            throw MissingInput("no ground truth for " + f.filename().string());
        RasterImage a = read_png(f);
        RasterImage b = read_png(truth_path);
        summary.rows.push_back({f.stem().string(), compute_psnr(a, b), compute_ssim(a, b)});
    }
    auto psnr_of = [](const EvalRow& r) { return r.psnr; };
    auto ssim_of = [](const EvalRow& r) { return r.ssim; };
    auto fold = [&](auto get, double& mn, double& mx, double& avg) {
        mn = get(summary.rows[0]);
        mx = mn;
        avg = 0;
        for (const auto& r : summary.rows) {
            mn = std::min(mn, get(r));
            mx = std::max(mx, get(r));
            avg += get(r);
        }
        avg /= double(summary.rows.size());
    };
    fold(psnr_of, summary.psnr_min, summary.psnr_max, summary.psnr_avg);
    fold(ssim_of, summary.ssim_min, summary.ssim_max, summary.ssim_avg);
    return summary;
}

}  // namespace birdplan

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "birdplan/fixture.hpp"
#include "birdplan/pipeline.hpp"

using namespace birdplan;

namespace {

struct ConfigCli {
    std::string config_path;
    std::optional<int> target_n, max_n, iterations, tile, bands, parallelism;
    std::optional<double> sigma, blur_threshold, trim_fraction;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> engine_cmd, blend;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config file (JSON)");
        cmd->add_option("--target-n", target_n, "target cameras per sub-scene");
        cmd->add_option("--max-n", max_n, "hard cap on cameras per sub-scene");
        cmd->add_option("--sigma", sigma, "cluster expansion threshold (>= 1)");
        cmd->add_option("--seed", seed, "clustering seed");
        cmd->add_option("--iterations", iterations, "training iterations per sub-scene");
        cmd->add_option("--engine-cmd", engine_cmd,
                        "external trainer command template "
                        "({dataset_dir} {artifact_path} {iterations})");
        cmd->add_option("--trim-fraction", trim_fraction, "plane fit outlier trim fraction");
        cmd->add_option("--tile", tile, "blur detection tile size");
        cmd->add_option("--blur-threshold", blur_threshold, "Laplacian variance threshold");
        cmd->add_option("--blend", blend, "blend mode: feather | multiband");
        cmd->add_option("--bands", bands, "multiband pyramid levels");
        cmd->add_option("--parallelism", parallelism, "training worker count");
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        std::string path = config_path;
        if (path.empty())
            if (const char* env = std::getenv("BIRDPLAN_CONFIG")) path = env;
        if (!path.empty()) cfg = config_from_json_file(path);
        // flags win over the config file
        if (target_n) cfg.target_per_scene = *target_n;
        if (max_n) cfg.max_n = *max_n;
        if (sigma) cfg.sigma = *sigma;
        if (seed) cfg.seed = *seed;
        if (iterations) cfg.iterations = *iterations;
        if (engine_cmd) cfg.engine_cmd = *engine_cmd;
        if (trim_fraction) cfg.trim_fraction = *trim_fraction;
        if (tile) cfg.blur.tile_size = *tile;
        if (blur_threshold) cfg.blur.threshold = *blur_threshold;
        if (blend) {
            if (*blend == "feather") cfg.blend = BlendMode::Feather;
            else if (*blend == "multiband") cfg.blend = BlendMode::Multiband;
            else throw ValidationError("unknown blend mode '" + *blend + "'");
        }
        if (bands) cfg.bands = *bands;
        if (parallelism) cfg.parallelism = *parallelism;
        cfg.validate();
        return cfg;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"birdplan: sub-scene decomposition, footprint indexing and "
                 "projection-guided re-rendering for aerial reconstructions"};
    app.require_subcommand(1);

    ConfigCli ccfg;
    std::string recon_dir, partition_path, index_path, plans_path, queries_path;
    std::string manifest_path, renders_dir, scene_path, out_path, truth_dir;

    auto* decompose = app.add_subcommand("decompose", "cluster cameras into sub-scenes");
    decompose->add_option("--recon-dir", recon_dir)->required();
    decompose->add_option("--out,--partition", out_path)->required();
    ccfg.attach(decompose);

    auto* index = app.add_subcommand("index", "fit the ground plane and build footprint rects");
    index->add_option("--recon-dir", recon_dir)->required();
    index->add_option("--partition", partition_path)->required();
    index->add_option("--out,--index-out", out_path)->required();
    ccfg.attach(index);

    auto* plan = app.add_subcommand("plan", "register query cameras against the index");
    plan->add_option("--index", index_path)->required();
    plan->add_option("--queries", queries_path)->required();
    plan->add_option("--recon-dir", recon_dir, "needed when queries reference images by id");
    plan->add_option("--out,--plans", out_path)->required();
    ccfg.attach(plan);

    auto* train = app.add_subcommand("train", "run per-sub-scene training jobs");
    train->add_option("--recon-dir", recon_dir)->required();
    train->add_option("--partition", partition_path)->required();
    train->add_option("--index", index_path)->required();
    train->add_option("--scene", scene_path, "synthetic engine scene spec (scene.json)");
    train->add_option("--out", out_path, "manifest output path")->required();
    ccfg.attach(train);

    auto* render = app.add_subcommand("render", "render partial images per plan");
    render->add_option("--manifest", manifest_path)->required();
    render->add_option("--plans", plans_path)->required();
    render->add_option("--index", index_path, "footprint index (plane for the synthetic engine)");
    render->add_option("--scene", scene_path, "synthetic engine scene spec");
    render->add_option("--out", out_path, "output directory")->required();
    ccfg.attach(render);

    auto* stitch_cmd = app.add_subcommand("stitch", "composite partial renders");
    stitch_cmd->add_option("--plans", plans_path)->required();
    stitch_cmd->add_option("--renders", renders_dir)->required();
    stitch_cmd->add_option("--out", out_path, "output directory")->required();
    ccfg.attach(stitch_cmd);

    auto* eval = app.add_subcommand("eval", "PSNR/SSIM against ground truth");
    eval->add_option("--renders", renders_dir, "stitched image directory")->required();
    eval->add_option("--truth", truth_dir)->required();
    eval->add_option("--out", out_path, "optional metrics JSON path");
    ccfg.attach(eval);

    auto* fixture = app.add_subcommand("make-fixture", "generate a synthetic scene fixture");
    FixtureSpec fspec;
    fixture->add_option("--out", out_path)->required();
    fixture->add_option("--grid-x", fspec.grid_x);
    fixture->add_option("--grid-y", fspec.grid_y);
    fixture->add_option("--extent-x", fspec.extent_x);
    fixture->add_option("--extent-y", fspec.extent_y);
    fixture->add_option("--altitude", fspec.altitude);
    fixture->add_option("--query-altitude", fspec.query_altitude);
    fixture->add_option("--queries", fspec.num_queries);
    fixture->add_option("--noise-seed", fspec.noise_seed);
    fixture->add_option("--pose-jitter", fspec.pose_jitter);
    fixture->add_option("--blur-radius", fspec.blur_radius);

    CLI11_PARSE(app, argc, argv);

    if (fixture->parsed()) {
        auto paths = make_fixture(fspec, out_path);
        std::cout << "fixture written to " << out_path << "\n"
                  << "  reconstruction: " << paths.recon_dir.string() << "\n"
                  << "  scene spec:     " << paths.scene.string() << "\n"
                  << "  queries:        " << paths.queries.string() << "\n"
                  << "  ground truth:   " << paths.truth_dir.string() << "\n";
        return 0;
    }

    PipelineConfig cfg = ccfg.resolve();

    if (decompose->parsed()) {
        Reconstruction recon = load_reconstruction(recon_dir);
        Partition part = stage_decompose(recon, cfg);
        save_partition(part, out_path);
        std::cout << "K = " << part.subscenes.size() << "\n";
        std::size_t total = 0, max_size = 0;
        for (const auto& s : part.subscenes) {
            std::cout << "  sub-scene " << s.id << ": " << s.member_ids.size()
                      << " cameras, radius " << s.base_radius << " -> " << s.expanded_radius
                      << "\n";
            total += s.member_ids.size();
            max_size = std::max(max_size, s.member_ids.size());
        }
        std::cout << "overlap: " << total << " memberships over " << recon.views.size()
                  << " cameras (max sub-scene " << max_size << ")\n";
    } else if (index->parsed()) {
        Reconstruction recon = load_reconstruction(recon_dir);
        Partition part = load_partition(partition_path);
        FootprintIndex idx = stage_index(recon, part, cfg);
        save_index(idx, out_path);
        std::cout << "indexed " << idx.camera_rects.size() << " cameras, "
                  << idx.subscene_rects.size() << " sub-scenes\n";
    } else if (plan->parsed()) {
        FootprintIndex idx = load_index(index_path);
        std::optional<Reconstruction> recon;
        if (!recon_dir.empty()) recon = load_reconstruction(recon_dir);
        auto queries = load_queries(queries_path, recon ? &*recon : nullptr);
        PlanSet plans = stage_plan(queries, idx, cfg);
        save_plans(plans, out_path);
        int stitched = 0;
        for (const auto& p : plans.plans)
            if (p.mode == PlanMode::StitchRequired) ++stitched;
        std::cout << plans.plans.size() << " plans (" << stitched << " stitch-required)\n";
    } else if (train->parsed()) {
        Reconstruction recon = load_reconstruction(recon_dir);
        Partition part = load_partition(partition_path);
        FootprintIndex idx = load_index(index_path);
        std::optional<SceneSpec> scene;
        if (!scene_path.empty()) scene = load_scene_spec(scene_path);
        auto artifact_dir = std::filesystem::path(out_path).parent_path() / "models";
        auto models = stage_train(recon, part, idx, cfg, scene ? &*scene : nullptr, artifact_dir,
                                  out_path);
        int trained = 0, failed = 0;
        for (const auto& m : models) {
            if (m.status == ModelStatus::Trained) ++trained;
            if (m.status == ModelStatus::Failed) {
                ++failed;
                std::cerr << "sub-scene " << m.subscene_id << " failed: " << m.error << "\n";
            }
        }
        std::cout << trained << " trained, " << failed << " failed\n";
    } else if (render->parsed()) {
        PlanSet plans = load_plans(plans_path);
        check_config_hash(plans.config_hash, cfg, "plans");
        std::string manifest_hash;
        auto models = load_manifest(manifest_path, &manifest_hash);
        check_config_hash(manifest_hash, cfg, "manifest");
        std::unique_ptr<RenderEngine> engine;
        if (cfg.engine_cmd.empty()) {
            if (scene_path.empty())
                throw ValidationError("render with the synthetic engine needs --scene");
            SceneSpec scene = load_scene_spec(scene_path);
            // the scene spec window lives in the index plane's coordinates
            GroundPlane plane;
            if (!index_path.empty()) plane = load_index(index_path).plane;
            engine = std::make_unique<SyntheticEngine>(read_png(scene.texture_path), plane,
                                                       scene.world_window, scene.blur_radius);
        } else {
            engine = std::make_unique<ExternalEngine>(cfg.engine_cmd, out_path);
        }
        stage_render(plans, models, *engine, out_path);
        std::cout << "rendered " << plans.plans.size() << " plans into " << out_path << "\n";
    } else if (stitch_cmd->parsed()) {
        PlanSet plans = load_plans(plans_path);
        stage_stitch(plans, renders_dir, cfg, out_path);
        std::cout << "stitched " << plans.plans.size() << " images into " << out_path << "\n";
    } else if (eval->parsed()) {
        EvalSummary summary = stage_eval(renders_dir, truth_dir);
        std::printf("%-24s %10s %8s\n", "image", "PSNR(dB)", "SSIM");
        for (const auto& r : summary.rows)
            std::printf("%-24s %10.3f %8.4f\n", r.name.c_str(), r.psnr, r.ssim);
        std::printf("%-24s %10s %8s\n", "", "Min/Max/Average", "");
        std::printf("PSNR  %.3f  %.3f  %.3f\n", summary.psnr_min, summary.psnr_max,
                    summary.psnr_avg);
        std::printf("SSIM  %.4f  %.4f  %.4f\n", summary.ssim_min, summary.ssim_max,
                    summary.ssim_avg);
        if (!out_path.empty()) {
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& r : summary.rows)
                rows.push_back({{"image", r.name}, {"psnr", r.psnr}, {"ssim", r.ssim}});
            nlohmann::json j = {{"schema_version", 1},
                                {"rows", rows},
                                {"psnr", {{"min", summary.psnr_min},
                                          {"max", summary.psnr_max},
                                          {"average", summary.psnr_avg}}},
                                {"ssim", {{"min", summary.ssim_min},
                                          {"max", summary.ssim_max},
                                          {"average", summary.ssim_avg}}}};
            std::ofstream out(out_path);
            out << j.dump(2) << '\n';
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "birdplan/fixture.hpp"
#include "birdplan/pipeline.hpp"

using namespace birdplan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

FixtureSpec small_spec() {
    FixtureSpec spec;
    spec.grid_x = 8;
    spec.grid_y = 4;
    spec.extent_x = 40;
    spec.extent_y = 20;
    spec.altitude = 10;
    spec.image_width = 80;
    spec.image_height = 60;
    spec.focal = 60;
    spec.texels_per_unit = 6;
    spec.cloud_points = 400;
    spec.num_queries = 4;
    spec.query_altitude = 18;
    spec.blur_radius = 4.0;
    return spec;
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.target_per_scene = 10;
    cfg.max_n = 14;
    cfg.sigma = 1.1;
    cfg.seed = 1;
    cfg.iterations = 100;
    cfg.blur = {8, 40.0};
    return cfg;
}

}  // namespace

TEST_CASE("config serialization and hashing") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.hash() == cfg.hash());

    PipelineConfig other = cfg;
    other.sigma = 1.2;
    CHECK(other.hash() != cfg.hash());

    auto round = config_from_json_text(config_to_json(other));
    CHECK(round.hash() == other.hash());
    CHECK(round.sigma == doctest::Approx(1.2));

    PipelineConfig bad = cfg;
    bad.sigma = 0.5;  // expansion factor below 1 shrinks clusters
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = cfg;
    bad.max_n = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    CHECK_THROWS_AS(check_config_hash("deadbeef", cfg, "partition"), StaleArtifact);
    CHECK_NOTHROW(check_config_hash(cfg.hash(), cfg, "partition"));
}

TEST_CASE("fixture generation produces a loadable scene") {
    TempDir dir("birdplan_fx");
    auto spec = small_spec();
    auto paths = make_fixture(spec, dir.path);

    auto recon = load_reconstruction(paths.recon_dir);
    CHECK(recon.views.size() == 32);
    CHECK(recon.cloud.points.size() == 400);

    auto scene = load_scene_spec(paths.scene);
    CHECK(fs::exists(scene.texture_path));
    CHECK(scene.blur_radius == doctest::Approx(4.0));
    CHECK(scene.world_window.width() > spec.extent_x);

    auto queries = load_queries(paths.queries);
    CHECK(queries.size() == 4);
    CHECK(queries[0].pose.center.z() == doctest::Approx(18));

    for (const auto& q : queries) CHECK(fs::exists(paths.truth_dir / (q.id + ".png")));

    // deterministic: a second fixture from the same spec is byte-identical
    TempDir dir2("birdplan_fx2");
    auto paths2 = make_fixture(spec, dir2.path);
    CHECK(slurp(paths2.recon_dir / "images.txt") == slurp(paths.recon_dir / "images.txt"));
    CHECK(slurp(paths2.texture) == slurp(paths.texture));
}

TEST_CASE("artifact round-trips and stage idempotence") {
    TempDir dir("birdplan_stages");
    auto paths = make_fixture(small_spec(), dir.path);
    auto recon = load_reconstruction(paths.recon_dir);
    auto cfg = small_config();

    auto partition = stage_decompose(recon, cfg);
    CHECK(partition.subscenes.size() == 4);  // 32 views / target 10 -> ceil = 4
    std::set<int> covered;
    for (const auto& s : partition.subscenes) {
        CHECK(s.member_ids.size() <= std::size_t(cfg.max_n));
        covered.insert(s.member_ids.begin(), s.member_ids.end());
    }
    CHECK(covered.size() == recon.views.size());

    save_partition(partition, dir.path / "partition.json");
    auto p2 = load_partition(dir.path / "partition.json");
    CHECK(p2.config_hash == partition.config_hash);
    REQUIRE(p2.subscenes.size() == partition.subscenes.size());
    for (std::size_t i = 0; i < p2.subscenes.size(); ++i) {
        CHECK(p2.subscenes[i].member_ids == partition.subscenes[i].member_ids);
        CHECK(p2.subscenes[i].expanded_radius ==
              doctest::Approx(partition.subscenes[i].expanded_radius).epsilon(1e-9));
    }

    // byte-identical rerun
    save_partition(stage_decompose(recon, cfg), dir.path / "partition2.json");
    CHECK(slurp(dir.path / "partition.json") == slurp(dir.path / "partition2.json"));

    auto index = stage_index(recon, partition, cfg);
    CHECK(index.camera_rects.size() == recon.views.size());
    CHECK(index.subscene_rects.size() == partition.subscenes.size());
    CHECK((index.plane.normal - Vec3(0, 0, 1)).norm() < 1e-6);

    save_index(index, dir.path / "index.json");
    auto i2 = load_index(dir.path / "index.json");
    CHECK(i2.camera_rects.size() == index.camera_rects.size());
    CHECK(i2.subscene_rects.size() == index.subscene_rects.size());
    CHECK(i2.subscene_rects[0].rect.min_u ==
          doctest::Approx(index.subscene_rects[0].rect.min_u).epsilon(1e-9));
    CHECK((i2.subscene_rects[0].center - index.subscene_rects[0].center).norm() < 1e-9);
    save_index(stage_index(recon, partition, cfg), dir.path / "index2.json");
    CHECK(slurp(dir.path / "index.json") == slurp(dir.path / "index2.json"));

    auto queries = load_queries(paths.queries);
    auto plans = stage_plan(queries, index, cfg);
    CHECK(plans.plans.size() == queries.size());
    save_plans(plans, dir.path / "plans.json");
    auto pl2 = load_plans(dir.path / "plans.json");
    REQUIRE(pl2.plans.size() == plans.plans.size());
    for (std::size_t i = 0; i < pl2.plans.size(); ++i) {
        CHECK(pl2.plans[i].mode == plans.plans[i].mode);
        CHECK(pl2.plans[i].subscene_ids == plans.plans[i].subscene_ids);
        CHECK(pl2.queries[i].intrinsics.fx ==
              doctest::Approx(plans.queries[i].intrinsics.fx).epsilon(1e-9));
    }
    save_plans(stage_plan(queries, index, cfg), dir.path / "plans2.json");
    CHECK(slurp(dir.path / "plans.json") == slurp(dir.path / "plans2.json"));

    // stale artifacts are rejected across stages
    PipelineConfig changed = cfg;
    changed.sigma = 1.3;
    CHECK_THROWS_AS(stage_index(recon, partition, changed), StaleArtifact);
    CHECK_THROWS_AS(stage_plan(queries, index, changed), StaleArtifact);
    CHECK_THROWS_AS(stage_stitch(plans, dir.path, changed, dir.path / "out"), StaleArtifact);
}

TEST_CASE("query files can reference reconstruction images") {
    TempDir dir("birdplan_qref");
    auto paths = make_fixture(small_spec(), dir.path);
    auto recon = load_reconstruction(paths.recon_dir);
    {
        std::ofstream out(dir.path / "byid.json");
        out << R"({"schema_version":1,"queries":[{"image_id":5},{"image_id":9}]})";
    }
    auto queries = load_queries(dir.path / "byid.json", &recon);
    REQUIRE(queries.size() == 2);
    CHECK(queries[0].id == recon.views[4].image_name);
    CHECK((queries[0].pose.center - recon.views[4].pose.center).norm() < 1e-12);

    CHECK_THROWS_AS(load_queries(dir.path / "byid.json"), ValidationError);
    {
        std::ofstream out(dir.path / "dangling.json");
        out << R"({"schema_version":1,"queries":[{"image_id":999}]})";
    }
    CHECK_THROWS_AS(load_queries(dir.path / "dangling.json", &recon), ConsistencyError);
}

TEST_CASE("train, render, stitch and eval on a small fixture") {
    TempDir dir("birdplan_e2e");
    auto spec = small_spec();
    auto paths = make_fixture(spec, dir.path);
    auto recon = load_reconstruction(paths.recon_dir);
    auto cfg = small_config();

    auto partition = stage_decompose(recon, cfg);
    auto index = stage_index(recon, partition, cfg);
    auto queries = load_queries(paths.queries);
    auto plans = stage_plan(queries, index, cfg);
    auto scene = load_scene_spec(paths.scene);

    int started = 0;
    JobHooks hooks;
    hooks.on_start = [&](const SubSceneModel&) { ++started; };
    auto models = stage_train(recon, partition, index, cfg, &scene, dir.path / "models",
                              dir.path / "manifest.json", hooks);
    CHECK(started == int(models.size()));
    for (const auto& m : models) CHECK(m.status == ModelStatus::Trained);

    // resume skips trained jobs
    started = 0;
    (void)stage_train(recon, partition, index, cfg, &scene, dir.path / "models",
                      dir.path / "manifest.json", hooks);
    CHECK(started == 0);
    // a changed config invalidates the manifest
    PipelineConfig changed = cfg;
    changed.iterations = 200;
    CHECK_THROWS_AS(stage_train(recon, partition, index, changed, &scene, dir.path / "models",
                                dir.path / "manifest.json"),
                    StaleArtifact);

    SyntheticEngine engine(read_png(scene.texture_path), index.plane, scene.world_window,
                           scene.blur_radius);
    stage_render(plans, models, engine, dir.path / "renders");
    for (std::size_t i = 0; i < plans.plans.size(); ++i)
        for (int id : plans.plans[i].subscene_ids)
            CHECK(fs::exists(dir.path / "renders" / plans.plans[i].query_image_id /
                             ("subscene_" + std::to_string(id) + ".png")));

    stage_stitch(plans, dir.path / "renders", cfg, dir.path / "stitched");
    for (const auto& p : plans.plans) {
        CHECK(fs::exists(dir.path / "stitched" / (p.query_image_id + ".png")));
        CHECK(fs::exists(dir.path / "stitched" / (p.query_image_id + ".report.json")));
    }

    auto summary = stage_eval(dir.path / "stitched", paths.truth_dir);
    CHECK(summary.rows.size() == plans.plans.size());
    CHECK(summary.psnr_min <= summary.psnr_avg);
    CHECK(summary.psnr_avg <= summary.psnr_max);
    CHECK(summary.psnr_avg > 20.0);
    CHECK(summary.ssim_avg > 0.7);

    // an untrained model blocks rendering
    models[0].status = ModelStatus::Pending;
    bool needed = false;
    for (const auto& p : plans.plans)
        for (int id : p.subscene_ids)
            if (id == models[0].subscene_id) needed = true;
    if (needed)
        CHECK_THROWS_AS(stage_render(plans, models, engine, dir.path / "renders_b"), StaleArtifact);
}

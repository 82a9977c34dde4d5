#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "birdplan/fixture.hpp"
#include "birdplan/pipeline.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace birdplan;

namespace {

RasterImage image_from_array(const py::array_t<std::uint8_t>& arr) {
    auto buf = arr.request();
    if (buf.ndim != 3 || buf.shape[2] != 3)
        throw ValidationError("expected an (H, W, 3) uint8 array");
    RasterImage img(int(buf.shape[1]), int(buf.shape[0]));
    auto a = arr.unchecked<3>();
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y)[c] = a(y, x, c);
    return img;
}

py::array_t<std::uint8_t> image_to_array(const RasterImage& img) {
    py::array_t<std::uint8_t> arr({img.height, img.width, 3});
    auto a = arr.mutable_unchecked<3>();
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) a(y, x, c) = img.at(x, y)[c];
    return arr;
}

std::vector<Vec3> points_from_array(const py::array_t<double>& arr) {
    auto buf = arr.request();
    if (buf.ndim != 2 || buf.shape[1] != 3) throw ValidationError("expected an (N, 3) array");
    auto a = arr.unchecked<2>();
    std::vector<Vec3> pts;
    pts.reserve(buf.shape[0]);
    for (py::ssize_t i = 0; i < buf.shape[0]; ++i) pts.emplace_back(a(i, 0), a(i, 1), a(i, 2));
    return pts;
}

}  // namespace

PYBIND11_MODULE(_birdplan, m) {
    m.doc() = "Aerial scene decomposition, footprint planning and stitching";

    py::register_exception<Error>(m, "BirdplanError");

    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def(py::init<>())
        .def_readwrite("target_per_scene", &PipelineConfig::target_per_scene)
        .def_readwrite("max_n", &PipelineConfig::max_n)
        .def_readwrite("sigma", &PipelineConfig::sigma)
        .def_readwrite("seed", &PipelineConfig::seed)
        .def_readwrite("iterations", &PipelineConfig::iterations)
        .def_readwrite("parallelism", &PipelineConfig::parallelism)
        .def("hash", &PipelineConfig::hash)
        .def("validate", &PipelineConfig::validate)
        .def("to_json", [](const PipelineConfig& c) { return config_to_json(c); })
        .def_static("from_json", &config_from_json_text);

    py::class_<PinholeIntrinsics>(m, "PinholeIntrinsics")
        .def(py::init<>())
        .def_readwrite("camera_id", &PinholeIntrinsics::camera_id)
        .def_readwrite("width", &PinholeIntrinsics::width)
        .def_readwrite("height", &PinholeIntrinsics::height)
        .def_readwrite("fx", &PinholeIntrinsics::fx)
        .def_readwrite("fy", &PinholeIntrinsics::fy)
        .def_readwrite("cx", &PinholeIntrinsics::cx)
        .def_readwrite("cy", &PinholeIntrinsics::cy);

    py::class_<View>(m, "View")
        .def_readonly("image_id", &View::image_id)
        .def_readonly("image_name", &View::image_name)
        .def_readonly("camera_id", &View::camera_id)
        .def_property_readonly("center",
                               [](const View& v) {
                                   const Vec3& c = v.pose.center;
                                   return py::make_tuple(c.x(), c.y(), c.z());
                               });

    py::class_<Reconstruction>(m, "Reconstruction")
        .def_readonly("views", &Reconstruction::views)
        .def_property_readonly("num_views",
                               [](const Reconstruction& r) { return r.views.size(); })
        .def_property_readonly("num_points",
                               [](const Reconstruction& r) { return r.cloud.points.size(); });

    m.def("load_reconstruction", &load_reconstruction, py::arg("recon_dir"));

    py::class_<SubScene>(m, "SubScene")
        .def_readonly("id", &SubScene::id)
        .def_readonly("member_ids", &SubScene::member_ids)
        .def_readonly("base_radius", &SubScene::base_radius)
        .def_readonly("expanded_radius", &SubScene::expanded_radius)
        .def_property_readonly("center", [](const SubScene& s) {
            return py::make_tuple(s.center.x(), s.center.y(), s.center.z());
        });

    py::class_<Partition>(m, "Partition")
        .def_readonly("subscenes", &Partition::subscenes)
        .def_readonly("config_hash", &Partition::config_hash);

    py::class_<FootprintRect>(m, "FootprintRect")
        .def(py::init([](double min_u, double max_u, double min_v, double max_v) {
                 return FootprintRect{min_u, max_u, min_v, max_v};
             }),
             py::arg("min_u"), py::arg("max_u"), py::arg("min_v"), py::arg("max_v"))
        .def_readwrite("min_u", &FootprintRect::min_u)
        .def_readwrite("max_u", &FootprintRect::max_u)
        .def_readwrite("min_v", &FootprintRect::min_v)
        .def_readwrite("max_v", &FootprintRect::max_v)
        .def("area", &FootprintRect::area);

    py::class_<GroundPlane>(m, "GroundPlane")
        .def(py::init<>())
        .def_property_readonly("normal",
                               [](const GroundPlane& p) {
                                   return py::make_tuple(p.normal.x(), p.normal.y(), p.normal.z());
                               })
        .def_readonly("offset", &GroundPlane::offset);

    py::class_<FootprintIndex>(m, "FootprintIndex")
        .def_readonly("plane", &FootprintIndex::plane)
        .def_property_readonly("num_cameras",
                               [](const FootprintIndex& i) { return i.camera_rects.size(); })
        .def_property_readonly("num_subscenes",
                               [](const FootprintIndex& i) { return i.subscene_rects.size(); });

    py::enum_<PlanMode>(m, "PlanMode")
        .value("StitchFree", PlanMode::StitchFree)
        .value("StitchRequired", PlanMode::StitchRequired);

    py::class_<RenderPlan>(m, "RenderPlan")
        .def_readonly("query_image_id", &RenderPlan::query_image_id)
        .def_readonly("mode", &RenderPlan::mode)
        .def_readonly("subscene_ids", &RenderPlan::subscene_ids)
        .def_readonly("query_footprint", &RenderPlan::query_footprint);

    py::class_<PlanSet>(m, "PlanSet").def_readonly("plans", &PlanSet::plans);

    m.def("decompose", &stage_decompose, py::arg("recon"), py::arg("config"));
    m.def("build_index", &stage_index, py::arg("recon"), py::arg("partition"), py::arg("config"));
    m.def(
        "plan_queries",
        [](const fs::path& queries_path, const FootprintIndex& index, const PipelineConfig& cfg) {
            return stage_plan(load_queries(queries_path), index, cfg);
        },
        py::arg("queries_path"), py::arg("index"), py::arg("config"));

    m.def(
        "fit_plane",
        [](const py::array_t<double>& pts, double trim_fraction) {
            return fit_plane(points_from_array(pts), trim_fraction);
        },
        py::arg("points"), py::arg("trim_fraction") = 0.1);

    m.def(
        "psnr",
        [](const py::array_t<std::uint8_t>& a, const py::array_t<std::uint8_t>& b) {
            return compute_psnr(image_from_array(a), image_from_array(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "ssim",
        [](const py::array_t<std::uint8_t>& a, const py::array_t<std::uint8_t>& b) {
            return compute_ssim(image_from_array(a), image_from_array(b));
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "blur_mask",
        [](const py::array_t<std::uint8_t>& img, int tile_size, double threshold) {
            BlurMask mask = detect_blur(image_from_array(img), tile_size, threshold);
            py::array_t<bool> out({mask.tiles_y, mask.tiles_x});
            auto a = out.mutable_unchecked<2>();
            for (int ty = 0; ty < mask.tiles_y; ++ty)
                for (int tx = 0; tx < mask.tiles_x; ++tx) a(ty, tx) = mask.tile_blurred(tx, ty);
            return out;
        },
        py::arg("image"), py::arg("tile_size") = 32, py::arg("threshold") = 100.0);

    m.def(
        "read_png", [](const fs::path& p) { return image_to_array(read_png(p)); },
        py::arg("path"));
    m.def(
        "write_png",
        [](const py::array_t<std::uint8_t>& img, const fs::path& p) {
            write_png(image_from_array(img), p);
        },
        py::arg("image"), py::arg("path"));

    m.def(
        "make_fixture",
        [](const fs::path& out_dir, int grid_x, int grid_y, int num_queries) {
            FixtureSpec spec;
            spec.grid_x = grid_x;
            spec.grid_y = grid_y;
            spec.num_queries = num_queries;
            auto paths = make_fixture(spec, out_dir);
            py::dict d;
            d["recon_dir"] = paths.recon_dir;
            d["texture"] = paths.texture;
            d["scene"] = paths.scene;
            d["queries"] = paths.queries;
            d["truth_dir"] = paths.truth_dir;
            return d;
        },
        py::arg("out_dir"), py::arg("grid_x") = 20, py::arg("grid_y") = 10,
        py::arg("num_queries") = 20);
}

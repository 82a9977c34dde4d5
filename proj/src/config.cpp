#include "birdplan/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace birdplan {

using nlohmann::json;

void PipelineConfig::validate() const {
    if (target_per_scene < 1) throw ValidationError("target_per_scene must be >= 1");
    if (max_n < target_per_scene) throw ValidationError("maxN must be >= target_per_scene");
    if (sigma < 1.0) throw ValidationError("sigma must be >= 1");
    if (iterations < 1) throw ValidationError("iterations must be >= 1");
    if (trim_fraction < 0 || trim_fraction >= 0.5)
        throw ValidationError("trim_fraction must be in [0, 0.5)");
    if (blur.tile_size < 4) throw ValidationError("blur tile must be >= 4");
    if (bands < 1) throw ValidationError("bands must be >= 1");
    if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
}

std::string config_to_json(const PipelineConfig& cfg) {
    json j = {{"target_per_scene", cfg.target_per_scene},
              {"maxN", cfg.max_n},
              {"sigma", cfg.sigma},
              {"seed", cfg.seed},
              {"iterations", cfg.iterations},
              {"engine_cmd", cfg.engine_cmd},
              {"trim_fraction", cfg.trim_fraction},
              {"blur", {{"tile", cfg.blur.tile_size}, {"threshold", cfg.blur.threshold}}},
              {"blend", cfg.blend == BlendMode::Feather ? "feather" : "multiband"},
              {"bands", cfg.bands},
              {"parallelism", cfg.parallelism}};
    return j.dump(2);
}

PipelineConfig config_from_json_text(const std::string& text) {
    json j = json::parse(text);
    PipelineConfig cfg;
    cfg.target_per_scene = j.value("target_per_scene", cfg.target_per_scene);
    cfg.max_n = j.value("maxN", cfg.max_n);
    cfg.sigma = j.value("sigma", cfg.sigma);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.engine_cmd = j.value("engine_cmd", cfg.engine_cmd);
    cfg.trim_fraction = j.value("trim_fraction", cfg.trim_fraction);
    if (j.contains("blur")) {
        cfg.blur.tile_size = j["blur"].value("tile", cfg.blur.tile_size);
        cfg.blur.threshold = j["blur"].value("threshold", cfg.blur.threshold);
    }
    std::string blend = j.value("blend", std::string("feather"));
    if (blend == "feather") cfg.blend = BlendMode::Feather;
    else if (blend == "multiband") cfg.blend = BlendMode::Multiband;
    else throw ValidationError("unknown blend mode '" + blend + "'");
    cfg.bands = j.value("bands", cfg.bands);
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.validate();
    return cfg;
}

PipelineConfig config_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string PipelineConfig::hash() const {
    // FNV-1a 64 over the canonical JSON form
    std::string text = config_to_json(*this);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace birdplan

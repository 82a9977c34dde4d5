#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "birdplan/stitching.hpp"

namespace birdplan {

struct PipelineConfig {
    int target_per_scene = 90;
    int max_n = 115;
    double sigma = 1.1;
    std::uint64_t seed = 0;
    int iterations = 5000;
    std::string engine_cmd;  // empty -> synthetic engine
    double trim_fraction = 0.1;
    BlurConfig blur;  // tile 32, threshold 100
    BlendMode blend = BlendMode::Feather;
    int bands = 5;
    int parallelism = 1;

    void validate() const;
    // Stable content hash; artifacts produced under different configs
    // never pass the cross-stage consistency check.
    std::string hash() const;
};

PipelineConfig config_from_json_file(const std::filesystem::path& path);
PipelineConfig config_from_json_text(const std::string& text);
std::string config_to_json(const PipelineConfig& cfg);

}  // namespace birdplan

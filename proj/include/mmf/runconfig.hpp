#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmf/augment.hpp"
#include "mmf/fusion.hpp"
#include "mmf/train.hpp"

namespace mmf {

struct DataConfig {
    // exactly one source: a manifest on disk, or the synthetic generator
    std::string manifest_path;
    bool synthetic = true;
    int64_t synthetic_n = 200;
    uint64_t synthetic_seed = 7;
    int synthetic_size = 64;
};

// Everything one experiment needs; serialized as a single JSON file whose
// defaults mirror the training recipe with toy-scale overrides.
struct RunConfig {
    DataConfig data;
    ModelConfig model;
    AugmentationSpec augment;
    TrainConfig train;
    double split_ratio = 0.8;
    bool use_birads = true;
    std::filesystem::path out_dir = "runs/run";
    std::vector<std::pair<std::string, std::string>> grid;  // (backbone tag, text tag)

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    // Collects every validation failure instead of stopping at the first.
    std::vector<std::string> validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& m);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Applies MMF_OUT_ROOT (when set) to relative output paths.
std::filesystem::path resolve_out_dir(const std::filesystem::path& out_dir);

}  // namespace mmf

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmf/metrics.hpp"
#include "mmf/runconfig.hpp"
#include "mmf/train.hpp"

namespace mmf {

// Subcommand entry points, also usable as a library (the binary in tools/ is
// a thin argument-parsing wrapper). All artifact-producing commands leave a
// reproducibility bundle in the run directory: config snapshot, seed, split
// digest, history, metrics.

struct TrainArtifacts {
    std::filesystem::path run_dir;
    FitResult result;
    std::string split_digest;
};

// Writes a synthetic dataset (manifest + per-record view images) to out_dir.
void cmd_generate(int64_t n, uint64_t seed, int image_size, const std::filesystem::path& out_dir);

TrainArtifacts cmd_train(const RunConfig& cfg);

// Loads a checkpoint, runs preprocessing + evaluation over the manifest, and
// writes metrics files when out_dir is given.
MetricsReport cmd_evaluate(const std::filesystem::path& checkpoint,
                           const std::filesystem::path& manifest,
                           const std::optional<std::filesystem::path>& out_dir);

struct GridCell {
    std::string backbone;
    std::string text;
    bool ok = false;
    std::string error;
    MetricsReport best;
    std::string split_digest;
};

struct GridArtifacts {
    std::filesystem::path out_dir;
    std::vector<GridCell> cells;
    std::string table_text;
};

// Trains every (backbone, text encoder) combination in the config's grid on
// the identical split; one failing cell is reported and skipped.
GridArtifacts cmd_grid(const RunConfig& cfg);

// Paper-style display name, e.g. ("vgg16", "lstm") -> "VGG16+LSTM".
std::string pretty_combo(const std::string& backbone_tag, const std::string& text_tag);

// Full argument-parsing entry point. Returns 0 on success; nonzero codes are
// categorized: 2 config/usage, 3 data/contract, 4 I/O, 5 runtime.
int run_cli(int argc, const char* const* argv);

}  // namespace mmf

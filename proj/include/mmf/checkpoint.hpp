#pragma once

#include <filesystem>
#include <memory>

#include "mmf/dataset.hpp"
#include "mmf/fusion.hpp"

namespace mmf {

// Binary parameter checkpoint. Layout (little-endian), documented for
// interop:
//   bytes 0..7   magic "MMFCKPT1"
//   u32          header length, followed by that many bytes of JSON holding
//                {"format_version":1, "model":<model config>,
//                 "tabular_stats":{"age_mean":..,"age_std":..}}
//   u32          entry count
//   per entry    u32 name length, name bytes (dotted parameter path),
//                u32 ndim, ndim x i64 dims, numel x f64 row-major values
// Entries cover parameters first, then buffers, in registration order.
void save_checkpoint(const FusionModel& model, const TabularStats& stats,
                     const std::filesystem::path& path);

struct LoadedModel {
    std::unique_ptr<FusionModel> model;
    TabularStats stats;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace mmf

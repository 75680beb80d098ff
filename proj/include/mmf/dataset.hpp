#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmf/image.hpp"
#include "mmf/tensor.hpp"

namespace mmf {

// Fixed view order used everywhere: LCC, LMLO, RCC, RMLO.
inline constexpr std::array<const char*, 4> kViewNames{"LCC", "LMLO", "RCC", "RMLO"};

struct TabularFields {
    int birads = 0;    // 0..6; 0 and 6 are excluded by preprocessing
    int density = 0;   // 1..4
    double age = 0;    // years
    bool family_history = false;
    std::optional<int> laterality;  // 0 left, 1 right, 2 both; absent for benign cases
};

struct MultimodalRecord {
    std::string patient_id;
    std::array<Image, 4> views;
    TabularFields tab;
    int label = 0;  // 1 = malignant/positive
};

// One manifest row with fields still raw; an empty string is a missing value.
struct ManifestRow {
    std::string patient_id;
    std::array<std::string, 4> view_paths;
    std::string birads, density, age, family_history, laterality, label;
};

// Delimited-text table of record descriptors. Leading '#' lines carry
// provenance (source tag, generator seed); the header row is fixed and
// validated on load.
struct Manifest {
    std::filesystem::path base_dir;  // image paths resolve relative to this
    std::string source_tag;
    uint64_t seed = 0;
    bool has_seed = false;
    std::vector<ManifestRow> rows;

    static Manifest load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file) const;
};

struct FilterReport {
    int64_t input_rows = 0;
    int64_t output_rows = 0;
    int64_t malformed = 0;  // unparseable/out-of-domain, reported row by row
    int64_t missing = 0;    // required field absent
    int64_t duplicate = 0;  // repeated patient_id, first occurrence kept
    int64_t birads06 = 0;   // BIRADS 0 (inconclusive) or 6 (biopsy-proven)
    std::vector<std::string> row_errors;

    int64_t removed() const { return malformed + missing + duplicate + birads06; }
    std::string to_text() const;
};

// Filtering rules applied per row, in order: malformed, missing value,
// duplicate id, BIRADS 0/6. Idempotent.
Manifest preprocess(const Manifest& m, FilterReport* report = nullptr);

// Seed-deterministic stratified split of record indices; both splits keep the
// label ratio within one record. Requires >= 2 records and at least one
// record on each side.
std::pair<std::vector<size_t>, std::vector<size_t>> stratified_split(const std::vector<int>& labels,
                                                                     double ratio, uint64_t seed);

// Synthetic stand-in for the clinical data: n/2 positive cases carry bright
// Gaussian lesions in the views selected by a sampled laterality plus
// correlated tabular fields; n/2 negatives carry background texture only.
// Writes 16-bit PGMs and a manifest under out_dir and returns the manifest.
Manifest generate_synthetic(int64_t n, uint64_t seed, int image_size,
                            const std::filesystem::path& out_dir);

// Materializes records (decodes images). Fields must be valid; run
// preprocess first for raw manifests.
std::vector<MultimodalRecord> load_records(const Manifest& m);

// Age normalization statistics, computed on the training split only.
struct TabularStats {
    double age_mean = 0;
    double age_std = 1;
};
TabularStats fit_tabular_stats(const std::vector<MultimodalRecord>& train,
                               const std::vector<size_t>& indices);

inline constexpr int64_t kTabularFields = 5;    // birads, density, age, history, laterality
inline constexpr int64_t kTabularEmbedDim = 8;  // per-token width in sequence mode

// Dense [5] encoding: [birads/5, density/4, z(age), history, laterality/3]
// with absent laterality mapped to the dedicated none code 3. Setting
// use_birads=false zeroes slot 0 (leakage-free mode).
Tensor encode_tabular_vector(const TabularFields& tab, const TabularStats& stats, bool use_birads = true);

// [5 x 8] one-token-per-field encoding for sequence models. Categorical
// fields are one-hot within their token; the age token carries z(age) in
// slot 0 with a marker in slot 7.
Tensor encode_tabular_sequence(const TabularFields& tab, const TabularStats& stats,
                               bool use_birads = true);

// FNV-1a digest of the ordered train/val patient ids; identical digests mean
// identical splits.
std::string split_digest(const std::vector<MultimodalRecord>& records,
                         const std::vector<size_t>& train_idx, const std::vector<size_t>& val_idx);

}  // namespace mmf

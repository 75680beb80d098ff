#pragma once

#include <filesystem>
#include <optional>

#include "mmf/augment.hpp"
#include "mmf/dataset.hpp"
#include "mmf/fusion.hpp"
#include "mmf/metrics.hpp"

namespace mmf {

struct TrainConfig {
    double lr = 5e-4;
    int batch_size = 8;
    int epochs = 100;
    uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    // Full validation (used by run configs): lr must be strictly positive.
    void validate() const;
};

// Adam with bias correction. Moments live here, mirroring parameter shapes.
class Adam {
public:
    Adam(std::vector<Tensor> params, const TrainConfig& cfg);
    // One update; every parameter must carry a gradient.
    void step();
    void zero_grad();
    int64_t step_count() const { return t_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<scalar>> m_, v_;
    TrainConfig cfg_;
    int64_t t_ = 0;
};

struct EpochRow {
    int epoch = 0;
    double train_loss = 0;
    MetricsReport val;
};

struct FitResult {
    std::vector<EpochRow> history;
    int best_epoch = -1;  // 1-based epoch with the best validation accuracy
    MetricsReport best_val;
    TabularStats stats;
    int64_t adam_steps = 0;
    int64_t samples_consumed = 0;

    std::string history_tsv() const;
};

struct EvalOutput {
    std::vector<double> scores;  // P(malignant)
    std::vector<int> labels;
    MetricsReport report;
};

// Deterministic evaluation pass: dropout off, batch statistics frozen,
// images resized to the model input when needed.
EvalOutput evaluate_model(FusionModel& model, const std::vector<MultimodalRecord>& records,
                          const std::vector<size_t>& indices, const TabularStats& stats, bool use_birads,
                          int batch_size);

// The training recipe: seeded shuffle, per-record augmentation, drop-last
// batches, cross-entropy loss, Adam, per-epoch validation. The best
// validation-accuracy model is written to checkpoint_path when given.
FitResult fit(FusionModel& model, const std::vector<MultimodalRecord>& records,
              const std::vector<size_t>& train_idx, const std::vector<size_t>& val_idx,
              const TrainConfig& cfg, const AugmentationSpec& aug, bool use_birads,
              const std::optional<std::filesystem::path>& checkpoint_path = std::nullopt);

}  // namespace mmf

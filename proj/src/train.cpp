#include "mmf/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "mmf/checkpoint.hpp"
#include "mmf/ops.hpp"

namespace mmf {

void TrainConfig::validate() const {
    if (!(lr > 0)) throw ConfigError("train: lr must be > 0, got " + std::to_string(lr));
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
        throw ConfigError("train: betas must lie in [0,1)");
    }
    if (!(eps > 0)) throw ConfigError("train: eps must be > 0");
}

Adam::Adam(std::vector<Tensor> params, const TrainConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    if (cfg.lr < 0) throw ConfigError("adam: lr must be >= 0");
    for (const Tensor& p : params_) {
        m_.emplace_back(static_cast<size_t>(p.numel()), scalar{0});
        v_.emplace_back(static_cast<size_t>(p.numel()), scalar{0});
    }
}

void Adam::step() {
    ++t_;
    const scalar bc1 = scalar{1} - std::pow(cfg_.beta1, static_cast<scalar>(t_));
    const scalar bc2 = scalar{1} - std::pow(cfg_.beta2, static_cast<scalar>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.has_grad()) {
            throw ContractError("adam: parameter " + std::to_string(i) + " has no gradient");
        }
        auto g = p.grad();
        auto data = p.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < m.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1 - cfg_.beta2) * g[j] * g[j];
            const scalar mhat = m[j] / bc1;
            const scalar vhat = v[j] / bc2;
            data[j] -= static_cast<scalar>(cfg_.lr) * mhat / (std::sqrt(vhat) + static_cast<scalar>(cfg_.eps));
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

namespace {

struct Batch {
    std::array<Tensor, 4> views;
    Tensor text;
    std::vector<int> labels;
};

Tensor encode_text_for(const FusionModel& model, const TabularFields& tab, const TabularStats& stats,
                       bool use_birads) {
    if (model.config().text.kind == TextEncoderKind::Lstm) {
        return encode_tabular_sequence(tab, stats, use_birads);
    }
    return encode_tabular_vector(tab, stats, use_birads);
}

// Stacks records [first, last) into batch tensors, optionally augmenting.
Batch make_batch(const FusionModel& model, const std::vector<MultimodalRecord>& records,
                 const std::vector<size_t>& order, size_t first, size_t last, const TabularStats& stats,
                 bool use_birads, const AugmentationSpec* aug, std::mt19937_64* rng) {
    const int64_t n = static_cast<int64_t>(last - first);
    const int side = model.config().backbone.input_size;
    Batch b;
    std::array<std::vector<scalar>, 4> view_data;
    for (auto& v : view_data) v.reserve(static_cast<size_t>(n * side * side));
    std::vector<Tensor> text_rows;
    for (size_t k = first; k < last; ++k) {
        const MultimodalRecord* rec = &records[order[k]];
        MultimodalRecord augmented;
        if (aug) {
            augmented = augment_record(*rec, *aug, *rng);
            rec = &augmented;
        }
        for (int v = 0; v < 4; ++v) {
            Image img = rec->views[static_cast<size_t>(v)];
            if (img.height != side || img.width != side) img = resize_bilinear(img, side, side);
            auto& dst = view_data[static_cast<size_t>(v)];
            dst.insert(dst.end(), img.px.begin(), img.px.end());
        }
        text_rows.push_back(encode_text_for(model, rec->tab, stats, use_birads));
        b.labels.push_back(rec->label);
    }
    for (int v = 0; v < 4; ++v) {
        b.views[static_cast<size_t>(v)] = Tensor({n, 1, side, side}, std::move(view_data[static_cast<size_t>(v)]));
    }
    // stack [5] rows into [N x 5], or [5 x 8] rows into [N x 5 x 8]
    std::vector<Tensor> rows;
    for (auto& t : text_rows) {
        Shape s = t.shape();
        s.insert(s.begin(), 1);
        rows.push_back(reshape(t, s));
    }
    b.text = concat(rows, 0);
    return b;
}

}  // namespace

EvalOutput evaluate_model(FusionModel& model, const std::vector<MultimodalRecord>& records,
                          const std::vector<size_t>& indices, const TabularStats& stats, bool use_birads,
                          int batch_size) {
    if (indices.empty()) throw ContractError("evaluate_model: empty index set");
    EvalOutput out;
    Ctx ctx;  // eval mode
    for (size_t start = 0; start < indices.size(); start += static_cast<size_t>(batch_size)) {
        const size_t stop = std::min(indices.size(), start + static_cast<size_t>(batch_size));
        Batch b = make_batch(model, records, indices, start, stop, stats, use_birads, nullptr, nullptr);
        Tensor logits = model.forward(b.views, b.text, ctx);
        Tensor probs = softmax(logits, 1);
        for (int64_t i = 0; i < logits.dim(0); ++i) {
            out.scores.push_back(probs.at({i, 1}));
            out.labels.push_back(b.labels[static_cast<size_t>(i)]);
        }
    }
    out.report = evaluate_scores(out.scores, out.labels);
    return out;
}

FitResult fit(FusionModel& model, const std::vector<MultimodalRecord>& records,
              const std::vector<size_t>& train_idx, const std::vector<size_t>& val_idx,
              const TrainConfig& cfg, const AugmentationSpec& aug, bool use_birads,
              const std::optional<std::filesystem::path>& checkpoint_path) {
    if (train_idx.empty() || val_idx.empty()) throw ContractError("fit: empty split");
    if (cfg.lr < 0) throw ConfigError("fit: lr must be >= 0");
    if (cfg.batch_size < 1 || cfg.epochs < 1) throw ConfigError("fit: bad batch size or epoch count");
    if (aug.crop_out != model.config().backbone.input_size) {
        throw ConfigError("fit: augment crop_out " + std::to_string(aug.crop_out) +
                          " does not match model input_size " +
                          std::to_string(model.config().backbone.input_size));
    }

    FitResult result;
    result.stats = fit_tabular_stats(records, train_idx);

    Adam adam(model.parameters(), cfg);
    std::mt19937_64 rng(derive_seed(cfg.seed, "train"));
    std::vector<size_t> order = train_idx;

    double best_acc = -1;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const size_t batches = order.size() / static_cast<size_t>(cfg.batch_size);  // drop-last
        double loss_sum = 0;
        for (size_t bi = 0; bi < batches; ++bi) {
            const size_t first = bi * static_cast<size_t>(cfg.batch_size);
            const size_t last = first + static_cast<size_t>(cfg.batch_size);
            Batch b = make_batch(model, records, order, first, last, result.stats, use_birads, &aug, &rng);

            Ctx ctx;
            ctx.training = true;
            ctx.rng = &rng;
            const std::mt19937_64 rng_pre_forward = rng;
            Tape tape;
            Tensor logits = model.forward(b.views, b.text, ctx);
            Tensor loss = cross_entropy(logits, b.labels);
            if (!std::isfinite(loss.item())) {
                // replay the forward with finite checking to name the first
                // op that produced a non-finite value
                std::mt19937_64 replay = rng_pre_forward;
                Ctx replay_ctx;
                replay_ctx.training = true;
                replay_ctx.rng = &replay;
                FiniteCheckGuard guard;
                try {
                    Tape replay_tape;
                    Tensor replay_logits = model.forward(b.views, b.text, replay_ctx);
                    cross_entropy(replay_logits, b.labels);
                } catch (const Error& e) {
                    throw Error("fit: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(bi) + ": " + e.what());
                }
                throw Error("fit: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(bi));
            }
            tape.backward(loss);
            adam.step();
            adam.zero_grad();
            loss_sum += loss.item();
            result.samples_consumed += cfg.batch_size;
        }
        if (batches == 0) throw ContractError("fit: training split smaller than one batch");

        EpochRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(batches);
        row.val = evaluate_model(model, records, val_idx, result.stats, use_birads, cfg.batch_size).report;
        result.history.push_back(row);
        if (row.val.accuracy > best_acc) {
            best_acc = row.val.accuracy;
            result.best_epoch = epoch;
            result.best_val = row.val;
            if (checkpoint_path) save_checkpoint(model, result.stats, *checkpoint_path);
        }
    }
    result.adam_steps = adam.step_count();
    return result;
}

std::string FitResult::history_tsv() const {
    std::ostringstream os;
    os << "epoch\ttrain_loss\taccuracy\tprecision\tsensitivity\tf1\tauc\n";
    char buf[32];
    auto full = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& row : history) {
        os << row.epoch << '\t' << full(row.train_loss) << '\t' << full(row.val.accuracy) << '\t'
           << full(row.val.precision) << '\t' << full(row.val.sensitivity) << '\t' << full(row.val.f1)
           << '\t' << full(row.val.auc) << "\n";
    }
    return os.str();
}

}  // namespace mmf

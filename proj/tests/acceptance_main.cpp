// Acceptance suite: one checked criterion per section, one printed line per
// criterion. Run with no arguments for the full sweep or `--only N` for a
// single criterion. Exit code 0 iff everything checked passed.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "mmf/augment.hpp"
#include "mmf/backbones.hpp"
#include "mmf/cli.hpp"
#include "mmf/fusion.hpp"
#include "mmf/metrics.hpp"
#include "mmf/text_encoders.hpp"
#include "mmf/train.hpp"
#include "test_util.hpp"

using namespace mmf;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Checker {
    int failures = 0;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            detail << "      failed: " << what << "\n";
        }
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path scratch_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("mmf_acceptance_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. gradient correctness

void criterion_gradients(Checker& c) {
    using mmftest::gradcheck;
    using mmftest::rand_tensor;
    using mmftest::rand_tensor_away_from_zero;
    const auto start = Clock::now();
    constexpr double kTol = 1e-4;

    for (int seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(9000 + seed);

        {  // matmul + bmm
            auto a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng), w = rand_tensor({3, 2}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) { return sum(mul(matmul(in[0], in[1]), w)); },
                                {a, b}) < kTol,
                      "matmul gradient");
            auto ba = rand_tensor({2, 2, 3}, rng), bb = rand_tensor({2, 3, 2}, rng), bw = rand_tensor({2, 2, 2}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) { return sum(mul(bmm(in[0], in[1]), bw)); },
                                {ba, bb}) < kTol,
                      "bmm gradient");
        }
        {  // conv2d, depthwise, pooling
            auto x = rand_tensor({1, 2, 5, 5}, rng), w = rand_tensor({3, 2, 3, 3}, rng),
                 wt = rand_tensor({1, 3, 3, 3}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          return sum(mul(conv2d(in[0], in[1], 2, 1), wt));
                      },
                                {x, w}) < kTol,
                      "conv2d gradient");
            auto dx = rand_tensor({1, 3, 4, 4}, rng), dw = rand_tensor({3, 1, 3, 3}, rng),
                 dwt = rand_tensor({1, 3, 4, 4}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          return sum(mul(depthwise_conv2d(in[0], in[1], 1, 1), dwt));
                      },
                                {dx, dw}) < kTol,
                      "depthwise_conv2d gradient");

            Tensor distinct({1, 1, 4, 4});
            std::vector<int> order(16);
            for (int i = 0; i < 16; ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            for (int i = 0; i < 16; ++i) distinct.mutable_data()[i] = order[i] * 0.41 - 3.0;
            auto pw = rand_tensor({1, 1, 2, 2}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          return sum(mul(pool2d(in[0], PoolKind::Max, 2, 2), pw));
                      },
                                {distinct}) < kTol,
                      "max pool gradient");
            auto ax = rand_tensor({1, 2, 4, 4}, rng), aw = rand_tensor({1, 2, 2, 2}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          return sum(mul(pool2d(in[0], PoolKind::Avg, 3, 1), aw));
                      },
                                {ax}) < kTol,
                      "avg pool gradient");
        }
        {  // elementwise suite and softmax
            auto x = rand_tensor({3, 4}, rng), y = rand_tensor({3, 4}, rng), w = rand_tensor({3, 4}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          Tensor t = add(mul(in[0], in[1]), sub(in[0], scale(in[1], 0.3)));
                          t = add(t, add(sigmoid(in[0]), add(tanh(in[1]), silu(in[0]))));
                          return sum(mul(w, t));
                      },
                                {x, y}) < kTol,
                      "elementwise/smooth activations gradient");
            auto k = rand_tensor_away_from_zero({3, 4}, rng, 0.05);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          return sum(mul(w, add(relu(in[0]), add(hard_swish(in[0]), hard_sigmoid(in[0])))));
                      },
                                {k}) < kTol,
                      "kinked activations gradient");
            auto s = rand_tensor({2, 5}, rng), sw = rand_tensor({2, 5}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) { return sum(mul(sw, softmax(in[0], 1))); },
                                {s}) < kTol,
                      "softmax gradient");
            auto d = rand_tensor({4, 4}, rng);
            c.require(gradcheck(
                          [&](const std::vector<Tensor>& in) {
                              std::mt19937_64 mask_rng(77);
                              return sum(dropout(in[0], 0.3, mask_rng));
                          },
                          {d}) < kTol,
                      "dropout gradient");
        }
        {  // broadcasting helpers and shape ops
            auto x = rand_tensor({2, 3, 4}, rng), b = rand_tensor({4}, rng), w = rand_tensor({2, 3, 4}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) { return sum(mul(w, bias_add(in[0], in[1]))); },
                                {x, b}) < kTol,
                      "bias_add gradient");
            auto cx = rand_tensor({2, 3, 2, 2}, rng), cb = rand_tensor({3}, rng), cs = rand_tensor({2, 3}, rng),
                 cw = rand_tensor({2, 3, 2, 2}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          return sum(mul(cw, channel_scale(channel_bias(in[0], in[1]), in[2])));
                      },
                                {cx, cb, cs}) < kTol,
                      "channel bias/scale gradient");
            auto e = rand_tensor({1, 2, 3}, rng), ew = rand_tensor({3, 2, 3}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) { return sum(mul(ew, expand_batch(in[0], 3))); },
                                {e}) < kTol,
                      "expand_batch gradient");
            auto p = rand_tensor({2, 3, 4}, rng), q = rand_tensor({2, 2, 4}, rng), pw = rand_tensor({4, 2, 5}, rng);
            c.require(gradcheck(
                          [&](const std::vector<Tensor>& in) {
                              Tensor j = concat({in[0], in[1]}, 1);
                              Tensor t = permute(j, {2, 0, 1});
                              auto parts = split(t, 2, {2, 3});
                              return sum(mul(pw, concat({parts[1], parts[0]}, 2)));
                          },
                          {p, q}) < kTol,
                      "shape op gradient");
        }
        {  // normalization ops
            auto x = rand_tensor({3, 2, 3, 3}, rng), g = rand_tensor({2}, rng, 0.5, 1.5), b = rand_tensor({2}, rng),
                 w = rand_tensor({3, 2, 3, 3}, rng);
            c.require(gradcheck(
                          [&](const std::vector<Tensor>& in) {
                              Tensor rm = Tensor::zeros({2}), rv = Tensor::ones({2});
                              return sum(mul(w, batchnorm2d(in[0], in[1], in[2], rm, rv, true)));
                          },
                          {x, g, b}) < kTol,
                      "batchnorm2d gradient");
            auto lx = rand_tensor({2, 3, 5}, rng), lg = rand_tensor({5}, rng, 0.5, 1.5), lb = rand_tensor({5}, rng),
                 lw = rand_tensor({2, 3, 5}, rng);
            c.require(gradcheck([&](const std::vector<Tensor>& in) {
                          return sum(mul(lw, layernorm(in[0], in[1], in[2])));
                      },
                                {lx, lg, lb}) < kTol,
                      "layernorm gradient");
        }
        {  // losses
            auto logits = rand_tensor({4, 2}, rng, -2, 2);
            std::vector<int> labels{0, 1, 1, 0};
            c.require(gradcheck([&](const std::vector<Tensor>& in) { return cross_entropy(in[0], labels); },
                                {logits}) < kTol,
                      "cross_entropy gradient");
        }
        {  // block types: linear, conv block, batchnorm layer, attention, lstm cell
            std::mt19937_64 brng(9100 + seed);
            Linear lin(4, 3, brng);
            auto lx = rand_tensor({2, 4}, rng);
            std::vector<Tensor> lin_inputs = lin.parameters();
            lin_inputs.push_back(lx);
            c.require(gradcheck([&](const std::vector<Tensor>&) { return sum(lin.forward(lx)); }, lin_inputs) < kTol,
                      "linear block gradient");

            Conv2d conv(2, 3, 3, 1, 1, brng);
            auto cx2 = rand_tensor({1, 2, 4, 4}, rng);
            std::vector<Tensor> conv_inputs = conv.parameters();
            conv_inputs.push_back(cx2);
            c.require(gradcheck([&](const std::vector<Tensor>&) { return sum(conv.forward(cx2)); }, conv_inputs) < kTol,
                      "conv block gradient");

            BatchNorm2d bn(3);
            auto bx = rand_tensor({2, 3, 3, 3}, rng);
            std::vector<Tensor> bn_inputs = bn.parameters();
            bn_inputs.push_back(bx);
            c.require(gradcheck(
                          [&](const std::vector<Tensor>&) {
                              Ctx ctx;
                              ctx.training = true;
                              return sum(bn.forward(bx, ctx));
                          },
                          bn_inputs) < kTol,
                      "batchnorm block gradient");

            MultiHeadAttention mha(4, 2, brng);
            auto ax2 = rand_tensor({1, 3, 4}, rng);
            std::vector<Tensor> mha_inputs = mha.parameters();
            mha_inputs.push_back(ax2);
            c.require(gradcheck(
                          [&](const std::vector<Tensor>&) {
                              Ctx ctx;
                              return sum(mha.forward(ax2, ctx));
                          },
                          mha_inputs) < kTol,
                      "attention block gradient");

            TextEncoderSpec lspec;
            lspec.kind = TextEncoderKind::Lstm;
            lspec.hidden_dim = 3;
            lspec.feature_dim = 2;
            lspec.embed_dim = 2;
            LstmEncoder lstm(lspec, brng);
            auto seq = rand_tensor({2, 3, 2}, rng);
            std::vector<Tensor> lstm_inputs = lstm.parameters();
            lstm_inputs.push_back(seq);
            c.require(gradcheck(
                          [&](const std::vector<Tensor>&) {
                              Ctx ctx;
                              return sum(lstm.forward(seq, ctx));
                          },
                          lstm_inputs) < kTol,
                      "lstm cell gradient");
        }
    }
    const double elapsed = seconds_since(start);
    c.require(elapsed < 60.0, "gradient suite exceeded 60 s (" + std::to_string(elapsed) + " s)");
    c.detail << "      gradient suite: " << elapsed << " s\n";
}

// ---------------------------------------------------------------------------
// 2. metric oracle equivalence

double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
    double credit = 0;
    int64_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) credit += 1.0;
            else if (scores[i] == scores[j]) credit += 0.5;
        }
    }
    return credit / static_cast<double>(pairs);
}

void criterion_metrics(Checker& c) {
    std::mt19937_64 rng(777);
    std::uniform_int_distribution<int> n_dist(2, 50), quant(0, 9);
    std::bernoulli_distribution lab(0.5);
    int done = 0;
    double worst = 0;
    while (done < 1000) {
        const int n = n_dist(rng);
        std::vector<double> scores(static_cast<size_t>(n));
        std::vector<int> labels(static_cast<size_t>(n));
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            scores[static_cast<size_t>(i)] = quant(rng) / 10.0;
            labels[static_cast<size_t>(i)] = lab(rng) ? 1 : 0;
            pos += labels[static_cast<size_t>(i)];
        }
        if (pos == 0 || pos == n) continue;
        ++done;
        worst = std::max(worst, std::abs(auc(scores, labels) - auc_pairwise(scores, labels)));
    }
    c.require(worst < 1e-12, "rank AUC vs pairwise oracle (worst diff " + std::to_string(worst) + ")");

    const PointMetrics m = point_metrics(Confusion{2, 1, 2, 5});
    c.require(m.accuracy == 0.7, "accuracy fixture");
    c.require(m.precision == 2.0 / 3.0, "precision fixture");
    c.require(m.sensitivity == 0.5, "sensitivity fixture");
    c.require(m.f1 == 4.0 / 7.0, "f1 fixture (4/7)");

    Confusion cf = confusion(std::vector<double>{0.9, 0.6, 0.4, 0.2}, std::vector<int>{1, 0, 1, 0});
    c.require(cf.tp == 1 && cf.fp == 1 && cf.fn == 1 && cf.tn == 1, "confusion fixture");
}

// ---------------------------------------------------------------------------
// 3. fusion contract

void criterion_fusion(Checker& c) {
    std::array<Tensor, 4> f;
    for (int i = 0; i < 4; ++i) f[static_cast<size_t>(i)] = Tensor::full({2, 8}, i + 1);
    Tensor ft = Tensor::full({2, 4}, 9);
    Tensor fc = FusionModel::fuse(f, ft);
    c.require(fc.shape() == Shape{2, 36}, "fused width 4*8+4 = 36");
    bool ordered = true;
    for (int64_t r = 0; r < 2; ++r) {
        for (int64_t j = 0; j < 36; ++j) {
            const double expect = j < 32 ? (j / 8 + 1) : 9;
            if (fc.at({r, j}) != expect) ordered = false;
        }
    }
    c.require(ordered, "slice ordering (f1,f2,f3,f4,ft) elementwise");

    ModelConfig cfg;
    cfg.backbone = BackboneSpec::from_tag("vgg16");
    cfg.backbone.input_size = 32;
    cfg.backbone.feature_dim = 8;
    cfg.backbone.base_width = 2;
    cfg.text.feature_dim = 4;
    FusionModel model(cfg, 3);
    std::mt19937_64 rng(4);
    Tensor img = Tensor::uniform({1, 1, 32, 32}, 0, 1, rng);
    Ctx ctx;
    auto feats = model.extract_image_features({img, img, img, img}, ctx);
    bool identical = true;
    for (int i = 1; i < 4; ++i) {
        for (int64_t j = 0; j < feats[0].numel(); ++j) {
            if (feats[static_cast<size_t>(i)].data()[j] != feats[0].data()[j]) identical = false;
        }
    }
    c.require(identical, "four identical views share identical features under shared weights");
}

// ---------------------------------------------------------------------------
// 4. ViT structure

void criterion_vit(Checker& c) {
    BackboneSpec spec = BackboneSpec::from_tag("vit");
    spec.input_size = 64;
    spec.vit_patch = 8;
    spec.vit_dim = 64;
    spec.vit_heads = 4;
    spec.vit_layers = 4;
    spec.feature_dim = 32;
    std::mt19937_64 rng(11);
    VitEncoder vit(spec, rng);
    c.require(vit.token_count() == 65, "S=64, P=8 yields 65 tokens");

    std::mt19937_64 drng(12);
    Tensor x = Tensor::uniform({2, 1, 64, 64}, 0, 1, drng);
    Ctx ctx;
    std::vector<Tensor> sink;
    ctx.attention_sink = &sink;
    vit.forward(x, ctx);
    c.require(sink.size() == 4, "one attention map per layer");
    double worst = 0;
    for (const Tensor& probs : sink) {
        const int64_t rows = probs.dim(0) * probs.dim(1);
        const int64_t t = probs.dim(2);
        for (int64_t r = 0; r < rows; ++r) {
            double acc = 0;
            for (int64_t k = 0; k < t; ++k) acc += probs.data()[static_cast<size_t>(r * t + k)];
            worst = std::max(worst, std::abs(acc - 1.0));
        }
    }
    c.require(worst < 1e-9, "attention rows sum to 1 within 1e-9 (worst " + std::to_string(worst) + ")");
}

// ---------------------------------------------------------------------------
// 5. augmentation invariants

void criterion_augment(Checker& c) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    Image img(24, 24);
    for (auto& v : img.px) v = u(rng);

    Image hh = hflip(hflip(img));
    Image vv = vflip(vflip(img));
    bool involution = true;
    for (size_t i = 0; i < img.px.size(); ++i) {
        if (hh.px[i] != img.px[i] || vv.px[i] != img.px[i]) involution = false;
    }
    c.require(involution, "flips are involutions");

    Image ident = apply_affine(img, AffineParams{});
    double worst = 0;
    for (size_t i = 0; i < img.px.size(); ++i) worst = std::max(worst, std::abs(ident.px[i] - img.px[i]));
    c.require(worst < 1e-9, "zero-parameter affine is the identity within 1e-9");

    AugmentationSpec spec;
    spec.crop_out = 24;
    bool in_range = true;
    for (int trial = 0; trial < 25; ++trial) {
        AugmentDraw d = sample_augment(spec, 24, 24, rng);
        Image out = apply_augment(img, d, spec);
        for (double v : out.px) {
            if (v < -1e-12 || v > 1 + 1e-12) in_range = false;
        }
    }
    c.require(in_range, "augmented pixels stay in [0,1]");

    MultimodalRecord rec;
    rec.patient_id = "acc";
    rec.tab.birads = 3;
    rec.tab.density = 2;
    rec.tab.age = 50;
    for (auto& view : rec.views) view = img;
    bool consistent = true;
    for (int trial = 0; trial < 10; ++trial) {
        std::mt19937_64 arng(100 + trial);
        MultimodalRecord out = augment_record(rec, spec, arng);
        for (int v = 1; v < 4; ++v) {
            for (size_t i = 0; i < out.views[0].px.size(); ++i) {
                if (out.views[static_cast<size_t>(v)].px[i] != out.views[0].px[i]) consistent = false;
            }
        }
    }
    c.require(consistent, "identical views stay identical across augmentation");
}

// ---------------------------------------------------------------------------
// 6. preprocessing funnel

void criterion_preprocess(Checker& c) {
    auto row = [](const std::string& id, int birads) {
        ManifestRow r;
        r.patient_id = id;
        for (auto& p : r.view_paths) p = "x.pgm";
        r.birads = std::to_string(birads);
        r.density = "2";
        r.age = "51.0";
        r.family_history = "0";
        r.label = "0";
        return r;
    };
    Manifest m;
    m.rows = {row("a", 3), row("b", 0), row("c", 3), row("d", 0), row("e", 6),
              row("f", 2), row("a", 3)};
    ManifestRow missing = row("g", 3);
    missing.age = "";
    m.rows.push_back(missing);
    m.rows.push_back(row("h", 4));
    m.rows.push_back(row("i", 5));

    FilterReport rep;
    Manifest out = preprocess(m, &rep);
    c.require(out.rows.size() == 5, "10-row fixture filters to exactly 5");
    c.require(rep.birads06 == 3 && rep.duplicate == 1 && rep.missing == 1,
              "filter report counts {birads06:3, dup:1, missing:1}");
    c.require(rep.removed() == 5 && rep.removed() == rep.input_rows - rep.output_rows,
              "report sums to 5 removals");

    FilterReport rep2;
    Manifest twice = preprocess(out, &rep2);
    bool idempotent = twice.rows.size() == out.rows.size() && rep2.removed() == 0;
    for (size_t i = 0; idempotent && i < out.rows.size(); ++i) {
        idempotent = twice.rows[i].patient_id == out.rows[i].patient_id;
    }
    c.require(idempotent, "preprocess is idempotent");
}

// ---------------------------------------------------------------------------
// 7. end-to-end surrogate experiment

RunConfig surrogate_config(const fs::path& out) {
    RunConfig cfg;
    cfg.data.synthetic = true;
    cfg.data.synthetic_n = 200;
    cfg.data.synthetic_seed = 7;
    cfg.data.synthetic_size = 64;
    cfg.model.backbone = BackboneSpec::from_tag("vgg16");  // toy defaults: 64 px, width 8, dim 32
    cfg.model.text.kind = TextEncoderKind::Ann;
    cfg.augment.crop_out = 64;
    cfg.train.lr = 5e-4;
    cfg.train.batch_size = 8;
    // the criterion allows up to 30 epochs; 15 keeps the suite fast while
    // still proving the targets are met inside the budget
    cfg.train.epochs = 15;
    cfg.train.seed = 2024;
    cfg.out_dir = out;
    return cfg;
}

void criterion_surrogate(Checker& c) {
    const auto root = scratch_dir("surrogate");

    auto best_by = [](const FitResult& r, auto&& pred) {
        for (const auto& row : r.history) {
            if (pred(row.val)) return row.epoch;
        }
        return -1;
    };

    {
        const auto start = Clock::now();
        RunConfig cfg = surrogate_config(root / "vgg16_ann");
        TrainArtifacts art = cmd_train(cfg);
        const double elapsed = seconds_since(start);
        const int hit = best_by(art.result, [](const MetricsReport& m) {
            return m.accuracy >= 0.95 && m.auc >= 0.97;
        });
        c.require(hit > 0, "VGG16+ANN reaches val accuracy >= 0.95 and AUC >= 0.97 within 30 epochs");
        c.require(elapsed < 300.0, "VGG16+ANN run stayed under 5 minutes");
        c.detail << "      vgg16+ann: target met at epoch " << hit << ", " << elapsed << " s\n";
    }
    {
        const auto start = Clock::now();
        RunConfig cfg = surrogate_config(root / "vit_lstm");
        cfg.model.backbone = BackboneSpec::from_tag("vit");
        cfg.model.text.kind = TextEncoderKind::Lstm;
        TrainArtifacts art = cmd_train(cfg);
        const double elapsed = seconds_since(start);
        const int hit = best_by(art.result, [](const MetricsReport& m) { return m.accuracy >= 0.85; });
        c.require(hit > 0, "ViT+LSTM reaches val accuracy >= 0.85 within 30 epochs");
        c.require(elapsed < 300.0, "ViT+LSTM run stayed under 5 minutes");
        c.detail << "      vit+lstm: target met at epoch " << hit << ", " << elapsed << " s\n";
    }
    fs::remove_all(root);
}

// ---------------------------------------------------------------------------
// 8. paper-shaped sweep

void criterion_grid(Checker& c) {
    const auto root = scratch_dir("grid");
    const auto start = Clock::now();

    RunConfig cfg = surrogate_config(root / "sweep");
    cfg.train.epochs = 2;  // reduced-epoch toy sweep
    cfg.grid.clear();
    const char* backbones[] = {"vgg16",     "vgg19",     "resnet34",  "resnet50", "mobilenet_v3",
                               "effnet_b0", "effnet_b1", "effnet_b2", "effnet_b3", "effnet_b7", "vit"};
    for (const char* bb : backbones) {
        cfg.grid.emplace_back(bb, "lstm");
    }
    for (const char* bb : backbones) {
        cfg.grid.emplace_back(bb, "ann");
    }
    GridArtifacts art = cmd_grid(cfg);
    const double elapsed = seconds_since(start);

    c.require(art.cells.size() == 22, "22 grid cells executed");
    int ok_cells = 0;
    std::string digest;
    bool digests_equal = true, metrics_in_range = true;
    for (const auto& cell : art.cells) {
        if (!cell.ok) continue;
        ++ok_cells;
        if (digest.empty()) digest = cell.split_digest;
        if (cell.split_digest != digest) digests_equal = false;
        for (double v : {cell.best.accuracy, cell.best.precision, cell.best.sensitivity, cell.best.f1,
                         cell.best.auc}) {
            if (!(v >= 0.0 && v <= 1.0)) metrics_in_range = false;
        }
    }
    c.require(ok_cells == 22, "every combination trained successfully");
    c.require(digests_equal, "identical split digests across all rows");
    c.require(metrics_in_range, "every reported metric lies in [0,1]");

    // table format: header + separator + one row per cell, Tables-1/2 columns
    const int lines = static_cast<int>(std::count(art.table_text.begin(), art.table_text.end(), '\n'));
    c.require(lines == 24, "22-row table in the Tables-1/2 column format");
    c.require(art.table_text.find("Feature Extractor") != std::string::npos &&
                  art.table_text.find("F1 Score") != std::string::npos,
              "table carries the expected column headers");
    c.require(elapsed < 2700.0, "sweep completed inside 45 minutes");
    c.detail << "      22-cell sweep: " << elapsed << " s\n";
    fs::remove_all(root);
}

// ---------------------------------------------------------------------------
// 9. determinism

void criterion_determinism(Checker& c) {
    const auto root = scratch_dir("determinism");
    RunConfig cfg = surrogate_config(root / "r1");
    cfg.data.synthetic_n = 32;
    cfg.data.synthetic_size = 32;
    cfg.model.backbone.input_size = 32;
    cfg.model.backbone.base_width = 4;
    cfg.model.backbone.feature_dim = 16;
    cfg.augment.crop_out = 32;
    cfg.train.epochs = 4;

    cmd_train(cfg);
    RunConfig cfg2 = cfg;
    cfg2.out_dir = root / "r2";
    cmd_train(cfg2);

    c.require(read_file(root / "r1" / "history.tsv") == read_file(root / "r2" / "history.tsv"),
              "loss history reproduced bit-identically");
    c.require(read_file(root / "r1" / "metrics.tsv") == read_file(root / "r2" / "metrics.tsv"),
              "metrics reproduced bit-identically");
    c.require(read_file(root / "r1" / "split_digest.txt") == read_file(root / "r2" / "split_digest.txt"),
              "split digest reproduced");
    fs::remove_all(root);
}

struct Criterion {
    int index;
    const char* name;
    std::function<void(Checker&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    }

    const std::vector<Criterion> criteria = {
        {1, "gradient correctness across ops and blocks", criterion_gradients},
        {2, "metric oracle equivalence", criterion_metrics},
        {3, "fusion contract", criterion_fusion},
        {4, "vit structure", criterion_vit},
        {5, "augmentation invariants", criterion_augment},
        {6, "preprocessing funnel", criterion_preprocess},
        {7, "end-to-end surrogate experiment", criterion_surrogate},
        {8, "paper-shaped 22-cell sweep", criterion_grid},
        {9, "determinism", criterion_determinism},
    };

    int failures = 0;
    for (const auto& crit : criteria) {
        if (only != 0 && crit.index != only) continue;
        Checker c;
        try {
            crit.fn(c);
        } catch (const std::exception& e) {
            c.require(false, std::string("unexpected exception: ") + e.what());
        }
        if (c.failures == 0) {
            std::cout << "[PASS] criterion " << crit.index << ": " << crit.name << "\n";
        } else {
            std::cout << "[FAIL] criterion " << crit.index << ": " << crit.name << "\n";
            ++failures;
        }
        std::cout << c.detail.str();
    }
    return failures == 0 ? 0 : 1;
}

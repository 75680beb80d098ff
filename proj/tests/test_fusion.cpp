#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mmf/fusion.hpp"

using namespace mmf;

namespace {

ModelConfig tiny_config(bool shared = true) {
    ModelConfig cfg;
    cfg.backbone = BackboneSpec::from_tag("vgg16");
    cfg.backbone.input_size = 32;
    cfg.backbone.feature_dim = 8;
    cfg.backbone.base_width = 2;
    cfg.text.kind = TextEncoderKind::Ann;
    cfg.text.hidden_dim = 6;
    cfg.text.feature_dim = 4;
    cfg.dropout = 0.2;
    cfg.shared_view_encoder = shared;
    return cfg;
}

std::array<Tensor, 4> random_views(std::mt19937_64& rng, int64_t n = 1, int side = 32) {
    std::array<Tensor, 4> v;
    for (auto& t : v) t = Tensor::uniform({n, 1, side, side}, 0, 1, rng);
    return v;
}

}  // namespace

TEST_CASE("identical views through a shared encoder give identical features") {
    FusionModel model(tiny_config(), 1);
    std::mt19937_64 rng(2);
    Tensor img = Tensor::uniform({1, 1, 32, 32}, 0, 1, rng);
    std::array<Tensor, 4> views{img, img, img, img};
    Ctx ctx;
    auto f = model.extract_image_features(views, ctx);
    for (int i = 1; i < 4; ++i) {
        REQUIRE(f[static_cast<size_t>(i)].shape() == f[0].shape());
        for (int64_t j = 0; j < f[0].numel(); ++j) {
            CHECK(f[static_cast<size_t>(i)].data()[j] == f[0].data()[j]);
        }
    }
}

TEST_CASE("feature shapes follow the batch") {
    FusionModel model(tiny_config(), 1);
    std::mt19937_64 rng(3);
    auto views = random_views(rng, 2);
    Ctx ctx;
    auto f = model.extract_image_features(views, ctx);
    for (const auto& fi : f) CHECK(fi.shape() == Shape{2, 8});
}

TEST_CASE("swapping two views swaps their features without changing values") {
    FusionModel model(tiny_config(), 1);
    std::mt19937_64 rng(4);
    auto views = random_views(rng);
    Ctx ctx;
    auto f = model.extract_image_features(views, ctx);

    std::array<Tensor, 4> swapped{views[1], views[0], views[2], views[3]};
    auto g = model.extract_image_features(swapped, ctx);
    for (int64_t j = 0; j < f[0].numel(); ++j) {
        CHECK(g[0].data()[j] == f[1].data()[j]);
        CHECK(g[1].data()[j] == f[0].data()[j]);
        CHECK(g[2].data()[j] == f[2].data()[j]);
    }
}

TEST_CASE("fuse concatenates in the fixed order with width 4*d_img + d_txt") {
    std::array<Tensor, 4> f;
    for (int i = 0; i < 4; ++i) f[static_cast<size_t>(i)] = Tensor::full({1, 8}, i + 1);
    Tensor ft = Tensor::full({1, 4}, 9);
    Tensor fc = FusionModel::fuse(f, ft);
    REQUIRE(fc.shape() == Shape{1, 36});
    // slice [0,8) equals f1 elementwise; last 4 entries are ft
    for (int64_t j = 0; j < 8; ++j) CHECK(fc.at({0, j}) == 1);
    for (int64_t j = 8; j < 16; ++j) CHECK(fc.at({0, j}) == 2);
    for (int64_t j = 32; j < 36; ++j) CHECK(fc.at({0, j}) == 9);

    Tensor zero_ft = Tensor::zeros({1, 4});
    Tensor fc2 = FusionModel::fuse(f, zero_ft);
    for (int64_t j = 32; j < 36; ++j) CHECK(fc2.at({0, j}) == 0);
}

TEST_CASE("fuse rejects mismatched batch sizes") {
    std::array<Tensor, 4> f;
    for (auto& t : f) t = Tensor::zeros({2, 8});
    CHECK_THROWS_AS(FusionModel::fuse(f, Tensor::zeros({3, 4})), ShapeError);
}

TEST_CASE("classifier fixtures: zero weights, probability sums, hand-set head") {
    FusionModel model(tiny_config(), 5);
    Ctx ctx;

    // zero head weights give probabilities (0.5, 0.5)
    for (auto& v : model.head().weight().mutable_data()) v = 0;
    std::mt19937_64 rng(6);
    Tensor fc = Tensor::uniform({3, 36}, -1, 1, rng);
    auto [logits, probs] = model.classify(fc, ctx);
    REQUIRE(logits.shape() == Shape{3, 2});
    for (scalar p : probs.data()) CHECK(p == doctest::Approx(0.5).epsilon(1e-12));

    // probabilities sum to 1 for random inputs
    std::mt19937_64 rng2(7);
    FusionModel model2(tiny_config(), 8);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor f2 = Tensor::uniform({4, 36}, -3, 3, rng2);
        auto [lg, pr] = model2.classify(f2, ctx);
        for (int64_t r = 0; r < 4; ++r) {
            CHECK(std::abs(pr.at({r, 0}) + pr.at({r, 1}) - 1.0) < 1e-12);
        }
    }

    // hand-set 36 -> 2 weight matrix against a by-hand affine + softmax
    FusionModel model3(tiny_config(), 9);
    auto w = model3.head().weight().mutable_data();
    for (size_t i = 0; i < w.size(); ++i) w[i] = 0.01 * (static_cast<double>(i % 7) - 3.0);
    auto b = model3.head().bias().mutable_data();
    b[0] = 0.05;
    b[1] = -0.02;
    std::mt19937_64 rng3(10);
    Tensor f3 = Tensor::uniform({1, 36}, -1, 1, rng3);
    auto [lg3, pr3] = model3.classify(f3, ctx);
    double z[2] = {0.05, -0.02};
    for (int64_t k = 0; k < 2; ++k) {
        for (int64_t j = 0; j < 36; ++j) z[k] += f3.at({0, j}) * model3.head().weight().at({j, k});
    }
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    CHECK(pr3.at({0, 0}) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-10));
    CHECK(pr3.at({0, 1}) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-10));
}

TEST_CASE("classify rejects wrong widths") {
    FusionModel model(tiny_config(), 1);
    Ctx ctx;
    CHECK_THROWS_AS(model.classify(Tensor::zeros({1, 35}), ctx), ShapeError);
}

TEST_CASE("end-to-end forward gives finite [N x 2] logits") {
    for (bool shared : {true, false}) {
        CAPTURE(shared);
        FusionModel model(tiny_config(shared), 11);
        std::mt19937_64 rng(12);
        auto views = random_views(rng, 3);
        Tensor text = Tensor::uniform({3, 5}, -1, 1, rng);
        Ctx ctx;
        Tensor logits = model.forward(views, text, ctx);
        REQUIRE(logits.shape() == Shape{3, 2});
        for (scalar v : logits.data()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("gradient reaches both modalities") {
    int ok = 0;
    for (uint64_t seed = 0; seed < 3; ++seed) {
        FusionModel model(tiny_config(), 20 + seed);
        std::mt19937_64 rng(30 + seed);
        auto views = random_views(rng, 2);
        Tensor text = Tensor::uniform({2, 5}, -1, 1, rng);
        Ctx ctx;
        ctx.training = true;
        std::mt19937_64 drop_rng(40 + seed);
        ctx.rng = &drop_rng;

        Tape tape;
        Tensor logits = model.forward(views, text, ctx);
        tape.backward(cross_entropy(logits, {0, 1}));

        auto nonzero_grad = [](const std::vector<NamedTensor>& params, const std::string& prefix) {
            for (const auto& [name, t] : params) {
                if (name.rfind(prefix, 0) != 0) continue;
                if (!t.has_grad()) continue;
                for (scalar g : t.grad()) {
                    if (g != 0) return true;
                }
            }
            return false;
        };
        const auto params = model.named_parameters();
        if (nonzero_grad(params, "backbone") && nonzero_grad(params, "text")) ++ok;
    }
    CHECK(ok >= 3);
}

TEST_CASE("evaluation-mode forward is bit-identical across passes") {
    FusionModel model(tiny_config(), 50);
    std::mt19937_64 rng(51);
    auto views = random_views(rng, 2);
    Tensor text = Tensor::uniform({2, 5}, -1, 1, rng);
    Ctx ctx;  // eval: dropout off
    Tensor a = model.forward(views, text, ctx);
    Tensor b = model.forward(views, text, ctx);
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mmf/augment.hpp"

using namespace mmf;

namespace {

Image make_image(int h, int w, const std::vector<double>& px) {
    Image img(h, w);
    img.px = px;
    return img;
}

Image smooth_image(int n) {
    Image img(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            img.at(r, c) = 0.5 + 0.3 * std::sin(2 * 3.14159265 * c / n) * std::cos(2 * 3.14159265 * r / n);
        }
    }
    return img;
}

double linf(const Image& a, const Image& b, int margin = 0) {
    double worst = 0;
    for (int r = margin; r < a.height - margin; ++r) {
        for (int c = margin; c < a.width - margin; ++c) {
            worst = std::max(worst, std::abs(a.at(r, c) - b.at(r, c)));
        }
    }
    return worst;
}

AugmentationSpec identity_spec(int size) {
    AugmentationSpec s;
    s.p_hflip = 0;
    s.p_vflip = 0;
    s.crop_out = size;
    s.crop_scale = {1.0, 1.0};
    s.aspect_range = {1.0, 1.0};
    s.rotate_max_deg = 0;
    s.scale_range = {1.0, 1.0};
    s.shift_frac = 0;
    return s;
}

}  // namespace

TEST_CASE("hflip fixture and involutions") {
    Image img = make_image(2, 2, {1, 2, 3, 4});
    Image h = hflip(img);
    CHECK(h.at(0, 0) == 2);
    CHECK(h.at(0, 1) == 1);
    CHECK(h.at(1, 0) == 4);
    CHECK(h.at(1, 1) == 3);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    Image r(5, 7);
    for (auto& v : r.px) v = u(rng);
    Image hh = hflip(hflip(r));
    Image vv = vflip(vflip(r));
    for (size_t i = 0; i < r.px.size(); ++i) {
        CHECK(hh.px[i] == r.px[i]);
        CHECK(vv.px[i] == r.px[i]);
    }
}

TEST_CASE("vflip of hflip equals a 180-degree rotation") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    Image img(6, 6);
    for (auto& v : img.px) v = u(rng);
    Image flipped = vflip(hflip(img));
    AffineParams rot180;
    rot180.rotate_deg = 180;
    Image rotated = apply_affine(img, rot180);
    CHECK(linf(flipped, rotated) < 1e-9);
}

TEST_CASE("rotation by 90 degrees matches the hand-rotated 2x2 grid") {
    Image img = make_image(2, 2, {1, 2, 3, 4});
    AffineParams rot90;
    rot90.rotate_deg = 90;
    Image r = apply_affine(img, rot90);
    CHECK(r.at(0, 0) == doctest::Approx(2).epsilon(1e-9));
    CHECK(r.at(0, 1) == doctest::Approx(4).epsilon(1e-9));
    CHECK(r.at(1, 0) == doctest::Approx(1).epsilon(1e-9));
    CHECK(r.at(1, 1) == doctest::Approx(3).epsilon(1e-9));
}

TEST_CASE("zero-parameter affine is the identity") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    Image img(9, 9);
    for (auto& v : img.px) v = u(rng);
    Image out = apply_affine(img, AffineParams{});
    CHECK(linf(out, img) < 1e-9);
}

TEST_CASE("random_resized_crop contract shape and degenerate full-image case") {
    std::mt19937_64 rng(4);
    AugmentationSpec spec;
    spec.crop_out = 24;
    for (int trial = 0; trial < 5; ++trial) {
        Image img(40 + trial * 3, 33 + trial);
        for (auto& v : img.px) v = 0.3;
        Image out = random_resized_crop(img, spec, rng);
        CHECK(out.height == 24);
        CHECK(out.width == 24);
    }

    // crop_scale (1,1), no aspect jitter, square input: pure resize
    Image grad(16, 16);
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) grad.at(r, c) = (r * 16 + c) / 256.0;
    }
    AugmentationSpec pure = identity_spec(8);
    pure.crop_out = 8;
    Image out = random_resized_crop(grad, pure, rng);
    Image direct = resize_bilinear(grad, 8, 8);
    CHECK(linf(out, direct) == 0.0);
}

TEST_CASE("random_resized_crop preserves constant images") {
    std::mt19937_64 rng(5);
    AugmentationSpec spec;
    spec.crop_out = 20;
    Image img(32, 32);
    for (auto& v : img.px) v = 17.0;
    for (int trial = 0; trial < 10; ++trial) {
        Image out = random_resized_crop(img, spec, rng);
        for (double v : out.px) CHECK(v == doctest::Approx(17.0).epsilon(1e-9));
    }
}

TEST_CASE("affine keeps constant images constant away from the border") {
    std::mt19937_64 rng(6);
    Image img(32, 32);
    for (auto& v : img.px) v = 0.6;
    AugmentationSpec spec;
    spec.crop_out = 32;
    for (int trial = 0; trial < 10; ++trial) {
        Image out = shift_scale_rotate(img, spec, rng);
        // interior: zero-filled border pixels can bleed at most a few px
        double worst = 0;
        for (int r = 10; r < 22; ++r) {
            for (int c = 10; c < 22; ++c) worst = std::max(worst, std::abs(out.at(r, c) - 0.6));
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("augmented pixel values stay inside [0,1]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    AugmentationSpec spec;
    spec.crop_out = 24;
    for (int trial = 0; trial < 20; ++trial) {
        Image img(32, 32);
        for (auto& v : img.px) v = u(rng);
        AugmentDraw d = sample_augment(spec, 32, 32, rng);
        Image out = apply_augment(img, d, spec);
        for (double v : out.px) {
            CHECK(v >= -1e-12);
            CHECK(v <= 1 + 1e-12);
        }
    }
}

TEST_CASE("a transform composed with its inverse parameters recovers the image") {
    Image img = smooth_image(48);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u_rot(-15, 15), u_scale(0.9, 1.1), u_shift(-2, 2);
    for (int trial = 0; trial < 10; ++trial) {
        AffineParams p;
        p.rotate_deg = u_rot(rng);
        p.scale = u_scale(rng);
        p.shift_x = u_shift(rng);
        p.shift_y = u_shift(rng);
        Image warped = apply_affine(img, p);
        Image back = apply_affine(warped, inverse_params(p));
        // evaluate away from the zero-filled border
        CHECK(linf(back, img, 12) <= 0.02);
    }
}

TEST_CASE("augment_record: identity spec, determinism, cross-view consistency") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0, 1);
    MultimodalRecord rec;
    rec.patient_id = "r1";
    rec.label = 1;
    rec.tab.birads = 4;
    rec.tab.density = 1;
    rec.tab.age = 50;
    rec.tab.laterality = 2;
    Image base(32, 32);
    for (auto& v : base.px) v = u(gen);
    for (auto& view : rec.views) view = base;

    // all-probability-zero, identity-range spec leaves the record unchanged
    std::mt19937_64 rng_a(10);
    MultimodalRecord same = augment_record(rec, identity_spec(32), rng_a);
    for (int v = 0; v < 4; ++v) {
        for (size_t i = 0; i < base.px.size(); ++i) {
            CHECK(same.views[static_cast<size_t>(v)].px[i] == base.px[i]);
        }
    }
    CHECK(same.label == rec.label);
    CHECK(same.tab.birads == rec.tab.birads);
    CHECK(same.tab.laterality == rec.tab.laterality);

    // same seed, same output
    AugmentationSpec spec;
    spec.crop_out = 32;
    std::mt19937_64 rng_b1(11), rng_b2(11);
    MultimodalRecord a = augment_record(rec, spec, rng_b1);
    MultimodalRecord b = augment_record(rec, spec, rng_b2);
    for (int v = 0; v < 4; ++v) {
        for (size_t i = 0; i < a.views[0].px.size(); ++i) {
            CHECK(a.views[static_cast<size_t>(v)].px[i] == b.views[static_cast<size_t>(v)].px[i]);
        }
    }

    // identical input views stay identical to each other
    for (int trial = 0; trial < 5; ++trial) {
        std::mt19937_64 rng_c(20 + trial);
        MultimodalRecord out = augment_record(rec, spec, rng_c);
        for (int v = 1; v < 4; ++v) {
            for (size_t i = 0; i < out.views[0].px.size(); ++i) {
                CHECK(out.views[static_cast<size_t>(v)].px[i] == out.views[0].px[i]);
            }
        }
    }
}

TEST_CASE("augmentation spec validation") {
    AugmentationSpec s;
    s.p_hflip = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = AugmentationSpec{};
    s.rotate_max_deg = 181;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = AugmentationSpec{};
    s.scale_range = {1.2, 0.8};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_NOTHROW(AugmentationSpec{}.validate());
}

TEST_CASE("tiny images fall back to a full resize") {
    std::mt19937_64 rng(30);
    AugmentationSpec spec;
    spec.crop_out = 16;
    spec.crop_scale = {0.9999, 1.0};
    spec.aspect_range = {2.9, 3.0};  // infeasible aspect on a tiny square source
    Image img(4, 4);
    for (auto& v : img.px) v = 0.5;
    bool fell_back = false;
    Image out = random_resized_crop(img, spec, rng, &fell_back);
    CHECK(fell_back);
    CHECK(out.height == 16);
    CHECK(out.width == 16);
}

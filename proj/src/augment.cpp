#include "mmf/augment.hpp"

#include <cmath>

namespace mmf {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void AugmentationSpec::validate() const {
    auto prob = [](double p) { return p >= 0 && p <= 1; };
    if (!prob(p_hflip) || !prob(p_vflip)) throw ConfigError("augment: flip probabilities must lie in [0,1]");
    if (crop_out < 1) throw ConfigError("augment: crop_out must be positive");
    if (!(crop_scale.first > 0 && crop_scale.first <= crop_scale.second && crop_scale.second <= 1)) {
        throw ConfigError("augment: crop_scale must satisfy 0 < lo <= hi <= 1");
    }
    if (!(aspect_range.first > 0 && aspect_range.first <= aspect_range.second)) {
        throw ConfigError("augment: aspect_range must satisfy 0 < lo <= hi");
    }
    if (!(rotate_max_deg >= 0 && rotate_max_deg <= 180)) {
        throw ConfigError("augment: rotate_max_deg must lie in [0,180]");
    }
    if (!(scale_range.first > 0 && scale_range.first <= scale_range.second)) {
        throw ConfigError("augment: scale_range must satisfy 0 < lo <= hi");
    }
    if (shift_frac < 0 || shift_frac > 0.5) throw ConfigError("augment: shift_frac must lie in [0,0.5]");
}

Image hflip(const Image& img) {
    Image out(img.height, img.width);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) out.at(r, c) = img.at(r, img.width - 1 - c);
    }
    return out;
}

Image vflip(const Image& img) {
    Image out(img.height, img.width);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) out.at(r, c) = img.at(img.height - 1 - r, c);
    }
    return out;
}

AffineParams inverse_params(const AffineParams& p) {
    // The sampling map is in = R(theta) (out - c - t)/s + c, so composing with
    // (-theta, 1/s, -R(theta) t / s) yields the identity.
    const double rad = p.rotate_deg * kPi / 180.0;
    const double cos_t = std::cos(rad), sin_t = std::sin(rad);
    AffineParams inv;
    inv.rotate_deg = -p.rotate_deg;
    inv.scale = 1.0 / p.scale;
    inv.shift_x = -(cos_t * p.shift_x - sin_t * p.shift_y) / p.scale;
    inv.shift_y = -(sin_t * p.shift_x + cos_t * p.shift_y) / p.scale;
    return inv;
}

Image apply_affine(const Image& img, const AffineParams& p) {
    if (p.scale <= 0) throw ContractError("apply_affine: scale must be positive");
    Image out(img.height, img.width);
    const double cx = (img.width - 1) / 2.0;
    const double cy = (img.height - 1) / 2.0;
    const double rad = p.rotate_deg * kPi / 180.0;
    const double cos_t = std::cos(rad), sin_t = std::sin(rad);
    const double inv_s = 1.0 / p.scale;
    for (int r = 0; r < img.height; ++r) {
        const double vy = (r - cy - p.shift_y) * inv_s;
        for (int c = 0; c < img.width; ++c) {
            const double vx = (c - cx - p.shift_x) * inv_s;
            const double sx = cos_t * vx - sin_t * vy + cx;
            const double sy = sin_t * vx + cos_t * vy + cy;
            out.at(r, c) = sample_bilinear(img, sy, sx, Border::Zero);
        }
    }
    return out;
}

AugmentDraw sample_augment(const AugmentationSpec& spec, int height, int width, std::mt19937_64& rng) {
    spec.validate();
    AugmentDraw d;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    d.do_hflip = u01(rng) < spec.p_hflip;
    d.do_vflip = u01(rng) < spec.p_vflip;

    // crop rectangle: sampled area fraction and log-uniform aspect jitter,
    // retried a few times before falling back to the full image
    const double area = static_cast<double>(height) * width;
    std::uniform_real_distribution<double> u_scale(spec.crop_scale.first, spec.crop_scale.second);
    std::uniform_real_distribution<double> u_log_aspect(std::log(spec.aspect_range.first),
                                                        std::log(spec.aspect_range.second));
    bool placed = false;
    for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
        const double target = area * u_scale(rng);
        const double aspect = std::exp(u_log_aspect(rng));
        const int cw = static_cast<int>(std::lround(std::sqrt(target * aspect)));
        const int ch = static_cast<int>(std::lround(std::sqrt(target / aspect)));
        if (cw >= 1 && ch >= 1 && cw <= width && ch <= height) {
            std::uniform_int_distribution<int> u_top(0, height - ch), u_left(0, width - cw);
            d.crop_top = u_top(rng);
            d.crop_left = u_left(rng);
            d.crop_h = ch;
            d.crop_w = cw;
            placed = true;
        }
    }
    if (!placed) {
        d.crop_top = 0;
        d.crop_left = 0;
        d.crop_h = height;
        d.crop_w = width;
        d.crop_fallback = true;
    }

    std::uniform_real_distribution<double> u_shift(-spec.shift_frac, spec.shift_frac);
    std::uniform_real_distribution<double> u_s(spec.scale_range.first, spec.scale_range.second);
    std::uniform_real_distribution<double> u_rot(-spec.rotate_max_deg, spec.rotate_max_deg);
    d.affine.shift_x = u_shift(rng) * width;
    d.affine.shift_y = u_shift(rng) * height;
    d.affine.scale = u_s(rng);
    d.affine.rotate_deg = u_rot(rng);
    return d;
}

namespace {

Image crop_and_resize(const Image& img, const AugmentDraw& d, int out_size) {
    Image crop(d.crop_h, d.crop_w);
    for (int r = 0; r < d.crop_h; ++r) {
        for (int c = 0; c < d.crop_w; ++c) crop.at(r, c) = img.at(d.crop_top + r, d.crop_left + c);
    }
    return resize_bilinear(crop, out_size, out_size);
}

}  // namespace

Image apply_augment(const Image& img, const AugmentDraw& draw, const AugmentationSpec& spec) {
    Image out = img;
    if (draw.do_hflip) out = hflip(out);
    if (draw.do_vflip) out = vflip(out);
    out = crop_and_resize(out, draw, spec.crop_out);
    const auto& a = draw.affine;
    if (a.shift_x != 0 || a.shift_y != 0 || a.scale != 1 || a.rotate_deg != 0) {
        out = apply_affine(out, a);
    }
    return out;
}

Image random_resized_crop(const Image& img, const AugmentationSpec& spec, std::mt19937_64& rng,
                          bool* fell_back) {
    AugmentDraw d = sample_augment(spec, img.height, img.width, rng);
    if (fell_back) *fell_back = d.crop_fallback;
    return crop_and_resize(img, d, spec.crop_out);
}

Image shift_scale_rotate(const Image& img, const AugmentationSpec& spec, std::mt19937_64& rng) {
    AugmentDraw d = sample_augment(spec, img.height, img.width, rng);
    return apply_affine(img, d.affine);
}

MultimodalRecord augment_record(const MultimodalRecord& rec, const AugmentationSpec& spec,
                                std::mt19937_64& rng) {
    for (const Image& v : rec.views) {
        if (v.height != rec.views[0].height || v.width != rec.views[0].width) {
            throw ContractError("augment_record: views must share dimensions");
        }
    }
    AugmentDraw d = sample_augment(spec, rec.views[0].height, rec.views[0].width, rng);
    MultimodalRecord out = rec;
    for (auto& v : out.views) v = apply_augment(v, d, spec);
    return out;
}

}  // namespace mmf

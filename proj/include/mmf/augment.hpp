#pragma once

#include <random>

#include "mmf/dataset.hpp"
#include "mmf/image.hpp"

namespace mmf {

// Training-time transform parameters. rotate/scale defaults follow the
// recipe bounds (rotations up to 90 degrees, scale 0.8-1.2); flip
// probabilities and the crop area/aspect ranges are artifact choices.
struct AugmentationSpec {
    double p_hflip = 0.5;
    double p_vflip = 0.5;
    int crop_out = 64;  // 224 at full scale
    std::pair<double, double> crop_scale = {0.8, 1.0};  // area fraction of the source
    std::pair<double, double> aspect_range = {3.0 / 4.0, 4.0 / 3.0};
    double rotate_max_deg = 90.0;
    std::pair<double, double> scale_range = {0.8, 1.2};
    double shift_frac = 0.0625;  // max translation as a fraction of image size

    void validate() const;
};

// Affine motion about the image center: scale, rotate (degrees, matching the
// row/column convention where +90 maps [[1,2],[3,4]] to [[2,4],[1,3]]), then
// translate by (shift_x, shift_y) pixels. Sampling is bilinear with zero
// fill outside the source.
struct AffineParams {
    double shift_x = 0;
    double shift_y = 0;
    double scale = 1;
    double rotate_deg = 0;
};

// Parameters whose transform exactly undoes `p` (up to interpolation).
AffineParams inverse_params(const AffineParams& p);

Image hflip(const Image& img);
Image vflip(const Image& img);
Image apply_affine(const Image& img, const AffineParams& p);

// One sampled parameter set, reusable across the four views of a record.
struct AugmentDraw {
    bool do_hflip = false;
    bool do_vflip = false;
    int crop_top = 0, crop_left = 0, crop_h = 0, crop_w = 0;
    bool crop_fallback = false;  // source smaller than any feasible crop
    AffineParams affine;
};

AugmentDraw sample_augment(const AugmentationSpec& spec, int height, int width, std::mt19937_64& rng);
// flips -> crop+resize to crop_out -> shift/scale/rotate
Image apply_augment(const Image& img, const AugmentDraw& draw, const AugmentationSpec& spec);

// Convenience single-image forms that draw their own parameters.
Image random_resized_crop(const Image& img, const AugmentationSpec& spec, std::mt19937_64& rng,
                          bool* fell_back = nullptr);
Image shift_scale_rotate(const Image& img, const AugmentationSpec& spec, std::mt19937_64& rng);

// Applies one parameter draw identically to all four views; tabular fields
// and the label pass through untouched.
MultimodalRecord augment_record(const MultimodalRecord& rec, const AugmentationSpec& spec,
                                std::mt19937_64& rng);

}  // namespace mmf

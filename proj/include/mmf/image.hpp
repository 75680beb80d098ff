#pragma once

#include <filesystem>
#include <vector>

#include "mmf/tensor.hpp"

namespace mmf {

// Grayscale image with values in [0,1], row-major.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> px;

    Image() = default;
    Image(int h, int w) : height(h), width(w), px(static_cast<size_t>(h) * w, 0.0) {}

    double& at(int r, int c) { return px[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return px[static_cast<size_t>(r) * width + c]; }
};

enum class Border { Clamp, Zero };

// Bilinear sample at real coordinates (y=row, x=col).
double sample_bilinear(const Image& img, double y, double x, Border border);

// Half-pixel-center bilinear resize with edge clamping; preserves constants.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const Image& img, const std::filesystem::path& path);

// [1 x H x W] tensor view of the image.
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

}  // namespace mmf

#include "mmf/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace mmf {

double sample_bilinear(const Image& img, double y, double x, Border border) {
    const int h = img.height, w = img.width;
    if (border == Border::Zero && (y < -1 || y > h || x < -1 || x > w)) return 0.0;

    const double fy = std::floor(y);
    const double fx = std::floor(x);
    const int y0 = static_cast<int>(fy);
    const int x0 = static_cast<int>(fx);
    const double wy = y - fy;
    const double wx = x - fx;

    auto fetch = [&](int r, int c) -> double {
        if (border == Border::Clamp) {
            r = std::clamp(r, 0, h - 1);
            c = std::clamp(c, 0, w - 1);
            return img.at(r, c);
        }
        if (r < 0 || r >= h || c < 0 || c >= w) return 0.0;
        return img.at(r, c);
    };

    const double top = fetch(y0, x0) * (1 - wx) + fetch(y0, x0 + 1) * wx;
    const double bot = fetch(y0 + 1, x0) * (1 - wx) + fetch(y0 + 1, x0 + 1) * wx;
    return top * (1 - wy) + bot * wy;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ContractError("resize: output dims must be positive");
    if (out_h == img.height && out_w == img.width) return img;
    Image out(out_h, out_w);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int r = 0; r < out_h; ++r) {
        const double y = (r + 0.5) * sy - 0.5;
        for (int c = 0; c < out_w; ++c) {
            const double x = (c + 0.5) * sx - 0.5;
            out.at(r, c) = sample_bilinear(img, y, x, Border::Clamp);
        }
    }
    return out;
}

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError("unsupported image format in " + path.string() + " (want binary PGM)");
    auto next_int = [&]() -> long {
        // skip whitespace and '#' comment lines
        while (true) {
            int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        return v;
    };
    const long w = next_int();
    const long h = next_int();
    const long maxval = next_int();
    if (w <= 0 || h <= 0 || (maxval != 255 && maxval != 65535)) {
        throw IoError("malformed PGM header in " + path.string());
    }
    in.get();  // single whitespace after maxval
    Image img(static_cast<int>(h), static_cast<int>(w));
    const size_t n = img.px.size();
    if (maxval == 255) {
        std::vector<uint8_t> buf(n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
        if (!in) throw IoError("truncated PGM data in " + path.string());
        for (size_t i = 0; i < n; ++i) img.px[i] = buf[i] / 255.0;
    } else {
        std::vector<uint8_t> buf(2 * n);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n));
        if (!in) throw IoError("truncated PGM data in " + path.string());
        for (size_t i = 0; i < n; ++i) {
            const unsigned v = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
            img.px[i] = v / 65535.0;
        }
    }
    return img;
}

void write_pgm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::vector<uint8_t> buf(img.px.size() * 2);
    for (size_t i = 0; i < img.px.size(); ++i) {
        const double v = std::clamp(img.px[i], 0.0, 1.0);
        const unsigned q = static_cast<unsigned>(std::lround(v * 65535.0));
        buf[2 * i] = static_cast<uint8_t>(q >> 8);
        buf[2 * i + 1] = static_cast<uint8_t>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing image data to " + path.string());
}

Tensor image_to_tensor(const Image& img) {
    std::vector<scalar> data(img.px.begin(), img.px.end());
    return Tensor({1, img.height, img.width}, std::move(data));
}

Image tensor_to_image(const Tensor& t) {
    if (t.ndim() != 3 || t.dim(0) != 1) {
        throw ShapeError("tensor_to_image: expected [1xHxW], got " + shape_str(t.shape()));
    }
    Image img(static_cast<int>(t.dim(1)), static_cast<int>(t.dim(2)));
    const auto d = t.data();
    std::copy(d.begin(), d.end(), img.px.begin());
    return img;
}

}  // namespace mmf

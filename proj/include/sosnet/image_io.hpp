#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sosnet/errors.hpp"
#include "sosnet/tensor.hpp"

namespace sosnet::imageio {

// Binary PPM (P6, maxval 255) is the only image format; no codec deps.
// Tensors are (3, H, W) planar float in [0,1]; files are interleaved RGB.

inline unsigned char quantize_byte(float v) {
    float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return (unsigned char)std::lround(c * 255.0f);
}

inline void write_ppm(const std::string& path, const Tensor& img) {
    if (img.shape.size() != 3 || img.shape[0] != 3)
        throw DataError("write_ppm expects a (3,H,W) tensor: " + path);
    std::size_t h = img.shape[1], w = img.shape[2];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image: " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                row[x * 3 + c] = quantize_byte(img.at3(c, y, x));
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    if (!out) throw DataError("short write: " + path);
}

namespace detail {
// PPM header tokens are separated by whitespace; '#' starts a comment.
inline std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok += char(c);
    }
    if (tok.empty()) throw DataError("truncated PPM header: " + path);
    return tok;
}
}  // namespace detail

inline Tensor load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image: " + path);
    if (detail::next_token(in, path) != "P6") throw DataError("not a P6 PPM: " + path);
    std::size_t w = 0, h = 0;
    unsigned long maxval = 0;
    try {
        w = std::stoul(detail::next_token(in, path));
        h = std::stoul(detail::next_token(in, path));
        maxval = std::stoul(detail::next_token(in, path));
    } catch (const std::exception&) {
        throw DataError("corrupt PPM header: " + path);
    }
    if (w == 0 || h == 0 || maxval != 255) throw DataError("unsupported PPM geometry: " + path);
    // next_token consumed exactly one whitespace after maxval; pixels follow
    std::vector<unsigned char> raw(w * h * 3);
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(in.gcount()) != raw.size()) throw DataError("truncated PPM pixels: " + path);

    Tensor img({3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img.at3(c, y, x) = float(raw[(y * w + x) * 3 + c]) / 255.0f;
    return img;
}

}  // namespace sosnet::imageio

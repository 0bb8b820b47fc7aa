// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "spix/error.hpp"
#include "spix/tensor.hpp"

namespace spix {

// Grayscale raster, row-major, nominal range [0, 1].
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}
    Image(std::size_t h, std::size_t w, std::vector<double> px) : height(h), width(w), pixels(std::move(px)) {
        if (pixels.size() != h * w) throw DimensionError("image data length does not match " + std::to_string(h) + "x" + std::to_string(w));
    }

    static Image from_tensor(const Tensor& t) {
        if (t.rank() == 3 && t.dim(0) == 1) return Image(t.dim(1), t.dim(2), t.values());
        if (t.rank() == 2) return Image(t.dim(0), t.dim(1), t.values());
        throw DimensionError("cannot view tensor " + shape_string(t.shape()) + " as an image");
    }
    Tensor to_tensor() const { return Tensor({1, height, width}, pixels); }

    std::size_t size() const noexcept { return pixels.size(); }
    bool square() const noexcept { return height == width; }
    double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

    friend bool operator==(const Image&, const Image&) = default;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.height != b.height || a.width != b.width) {
        throw DimensionError(std::string(what) + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                             " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
    }
}

inline std::uint8_t quantize8(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Binary PGM (P5), maxval 255.
inline void write_pgm(const std::string& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path, "cannot open for writing");
    os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<char> bytes(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) bytes[i] = static_cast<char>(quantize8(img.pixels[i]));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError(path, "write failed");
}

inline Image read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path, "cannot open for reading");
    std::string magic;
    is >> magic;
    if (magic != "P5") throw FormatError(0, "not a binary PGM (P5): " + path);
    auto next_number = [&](const char* what) {
        for (;;) {
            is >> std::ws;
            if (is.peek() == '#') {
                std::string skip;
                std::getline(is, skip);
                continue;
            }
            long v = -1;
            is >> v;
            if (!is || v <= 0) {
                throw FormatError(static_cast<std::uint64_t>(std::max<std::streamoff>(is.tellg(), 0)),
                                  std::string("bad PGM ") + what + ": " + path);
            }
            return static_cast<std::size_t>(v);
        }
    };
    const std::size_t w = next_number("width");
    const std::size_t h = next_number("height");
    const std::size_t maxval = next_number("maxval");
    if (maxval > 255) throw FormatError(0, "16-bit PGM not supported: " + path);
    is.get();
    std::vector<char> bytes(w * h);
    const auto start = is.tellg();
    is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw FormatError(static_cast<std::uint64_t>(start) + static_cast<std::uint64_t>(is.gcount()),
                          "truncated PGM payload: " + path);
    }
    Image img(h, w);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img.pixels[i] = static_cast<double>(static_cast<std::uint8_t>(bytes[i])) / static_cast<double>(maxval);
    }
    return img;
}

// Places images left to right on a shared canvas (heights must match).
inline Image hconcat(const std::vector<Image>& parts) {
    if (parts.empty()) return {};
    std::size_t w = 0;
    for (const auto& p : parts) {
        if (p.height != parts.front().height) throw DimensionError("hconcat: heights differ");
        w += p.width;
    }
    Image out(parts.front().height, w);
    std::size_t x0 = 0;
    for (const auto& p : parts) {
        for (std::size_t y = 0; y < p.height; ++y)
            for (std::size_t x = 0; x < p.width; ++x) out.at(y, x0 + x) = p.at(y, x);
        x0 += p.width;
    }
    return out;
}

} // namespace spix

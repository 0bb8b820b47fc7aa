// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Compressed sampling stage. Trainable real-valued latent weights are
// binarized to +-1 illumination patterns; a scene is sampled as one inner
// product per pattern. Gradients reach the latent weights through a clipped
// straight-through rule.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spix/binio.hpp"
#include "spix/compensated.hpp"
#include "spix/error.hpp"
#include "spix/image.hpp"
#include "spix/tensor.hpp"

namespace spix {

// Number of patterns for a sampling rate on an N x N image.
inline std::size_t measurement_count(double rate, std::size_t side) {
    if (!(rate > 0.0 && rate <= 1.0)) throw ParameterError("sampling rate must lie in (0, 1], got " + std::to_string(rate));
    const auto m = static_cast<std::size_t>(std::llround(rate * static_cast<double>(side * side)));
    return m == 0 ? 1 : m;
}

// M x N^2 trainable matrix; rows are the latent patterns.
struct LatentWeights {
    std::size_t count = 0; // M
    std::size_t side = 0;  // N
    Tensor values;         // {M, N*N}

    LatentWeights() = default;
    LatentWeights(std::size_t m, std::size_t n, Tensor v) : count(m), side(n), values(std::move(v)) {
        if (values.shape() != Shape{m, n * n}) {
            throw DimensionError("latent weights must be " + std::to_string(m) + "x" + std::to_string(n * n));
        }
    }

    static LatentWeights uniform(std::size_t m, std::size_t n, double half_width, std::mt19937_64& rng) {
        std::uniform_real_distribution<double> dist(-half_width, half_width);
        Tensor v({m, n * n});
        for (double& x : v.data()) x = dist(rng);
        return {m, n, std::move(v)};
    }

    void clamp_unit() {
        for (double& x : values.data()) x = std::clamp(x, -1.0, 1.0);
    }
};

// M binary patterns, each N x N, entries exactly -1 or +1.
class PatternStack {
public:
    PatternStack() = default;
    PatternStack(std::size_t count, std::size_t side, std::vector<std::int8_t> entries)
        : count_(count), side_(side), entries_(std::move(entries)) {
        if (entries_.size() != count_ * side_ * side_) throw DimensionError("pattern stack length mismatch");
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i] != 1 && entries_[i] != -1) {
                throw ValidationError("pattern entry " + std::to_string(i) + " is not +-1");
            }
        }
    }

    static PatternStack random(std::size_t count, std::size_t side, std::mt19937_64& rng) {
        std::vector<std::int8_t> e(count * side * side);
        std::bernoulli_distribution coin(0.5);
        for (auto& v : e) v = coin(rng) ? 1 : -1;
        return {count, side, std::move(e)};
    }

    std::size_t count() const noexcept { return count_; }
    std::size_t side() const noexcept { return side_; }
    std::size_t pixels() const noexcept { return side_ * side_; }
    std::span<const std::int8_t> entries() const noexcept { return entries_; }
    std::span<const std::int8_t> pattern(std::size_t m) const {
        return std::span<const std::int8_t>(entries_).subspan(m * pixels(), pixels());
    }
    std::int8_t at(std::size_t m, std::size_t p) const { return entries_[m * pixels() + p]; }

    // The stack reinterpreted as real latent values.
    LatentWeights as_latent() const {
        Tensor v({count_, pixels()});
        for (std::size_t i = 0; i < entries_.size(); ++i) v[i] = entries_[i];
        return {count_, side_, std::move(v)};
    }

    friend bool operator==(const PatternStack&, const PatternStack&) = default;

private:
    std::size_t count_ = 0;
    std::size_t side_ = 0;
    std::vector<std::int8_t> entries_;
};

// sign with sign(0) = +1.
inline PatternStack binarize(const LatentWeights& latent) {
    std::vector<std::int8_t> e(latent.values.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double v = latent.values[i];
        if (!std::isfinite(v)) throw NumericalError("binarize: non-finite latent value at index " + std::to_string(i));
        e[i] = v >= 0.0 ? 1 : -1;
    }
    return {latent.count, latent.side, std::move(e)};
}

// y_m = <pattern_m, vec(image)> with row-major flattening.
inline std::vector<double> measure(const PatternStack& patterns, const Image& image) {
    if (!image.square() || image.height != patterns.side()) {
        throw DimensionError("measure: image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                             " vs pattern side " + std::to_string(patterns.side()));
    }
    std::vector<double> y(patterns.count(), 0.0);
    const std::size_t n = patterns.pixels();
    for (std::size_t m = 0; m < patterns.count(); ++m) {
        const std::int8_t* row = patterns.entries().data() + m * n;
        CompensatedSum acc;
        for (std::size_t p = 0; p < n; ++p) acc.add(row[p] > 0 ? image.pixels[p] : -image.pixels[p]);
        y[m] = acc.value();
    }
    return y;
}

// Straight-through gradient: pass where |latent| <= 1, zero elsewhere.
inline Tensor ste_grad(const Tensor& upstream, const LatentWeights& latent) {
    require_same_shape(upstream, latent.values, "ste_grad");
    Tensor g = upstream;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (std::abs(latent.values[i]) > 1.0) g[i] = 0.0;
    }
    return g;
}

// ---------------------------------------------------------------- DMD tiling

struct Canvas {
    std::size_t width = 1024;
    std::size_t height = 768;
};

struct TiledFrame {
    std::size_t width = 0, height = 0;
    std::size_t row0 = 0, col0 = 0; // top-left corner of the active window
    std::vector<std::uint8_t> mirrors; // row-major, 0/1

    std::uint8_t at(std::size_t r, std::size_t c) const { return mirrors[r * width + c]; }
};

// Magnifies pattern m of the stack by `factor` and centers it on the device;
// +1 maps to an "on" mirror, -1 and the border to "off".
inline TiledFrame tile_for_dmd(const PatternStack& stack, std::size_t m, std::size_t factor, Canvas canvas = {}) {
    const std::size_t n = stack.side();
    if (factor == 0 || factor * n > canvas.width || factor * n > canvas.height) {
        throw DimensionError("tile_for_dmd: " + std::to_string(factor) + "x" + std::to_string(n) +
                             " does not fit canvas " + std::to_string(canvas.width) + "x" +
                             std::to_string(canvas.height));
    }
    if (m >= stack.count()) throw ParameterError("tile_for_dmd: pattern index out of range");
    TiledFrame f{canvas.width, canvas.height, (canvas.height - factor * n) / 2, (canvas.width - factor * n) / 2,
                 std::vector<std::uint8_t>(canvas.width * canvas.height, 0)};
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            if (stack.at(m, y * n + x) < 0) continue;
            for (std::size_t dy = 0; dy < factor; ++dy)
                for (std::size_t dx = 0; dx < factor; ++dx)
                    f.mirrors[(f.row0 + y * factor + dy) * canvas.width + f.col0 + x * factor + dx] = 1;
        }
    return f;
}

// Pattern m as a 0/255 image.
inline Image pattern_image(const PatternStack& stack, std::size_t m) {
    Image img(stack.side(), stack.side());
    for (std::size_t p = 0; p < stack.pixels(); ++p) img.pixels[p] = stack.at(m, p) > 0 ? 1.0 : 0.0;
    return img;
}

// ---------------------------------------------------------------- SPIP files
//
// "SPIP" | u32 version=1 | u32 M | u32 N | M planes; each plane is N rows,
// each row bit-packed MSB first and padded to a byte; bit 1 <-> +1.

inline constexpr std::uint32_t kSpipVersion = 1;

inline std::size_t spip_row_bytes(std::size_t side) { return (side + 7) / 8; }
inline std::size_t spip_file_size(std::size_t count, std::size_t side) {
    return 16 + count * side * spip_row_bytes(side);
}

inline std::vector<char> encode_patterns(const PatternStack& stack) {
    binio::Writer w;
    w.bytes("SPIP");
    w.u32(kSpipVersion);
    w.u32(static_cast<std::uint32_t>(stack.count()));
    w.u32(static_cast<std::uint32_t>(stack.side()));
    const std::size_t n = stack.side();
    for (std::size_t m = 0; m < stack.count(); ++m)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t b = 0; b < spip_row_bytes(n); ++b) {
                std::uint8_t byte = 0;
                for (std::size_t bit = 0; bit < 8; ++bit) {
                    const std::size_t x = b * 8 + bit;
                    if (x < n && stack.at(m, y * n + x) > 0) byte |= static_cast<std::uint8_t>(0x80u >> bit);
                }
                w.u8(byte);
            }
    return w.buffer();
}

inline PatternStack decode_patterns(binio::Reader& r) {
    r.expect_magic("SPIP");
    const std::uint64_t version_at = r.offset();
    if (r.u32("version") != kSpipVersion) throw FormatError(version_at, "unsupported SPIP version");
    const std::size_t m = r.u32("pattern count");
    const std::uint64_t side_at = r.offset();
    const std::size_t n = r.u32("pattern side");
    if (m == 0 || n == 0) throw FormatError(side_at, "SPIP dimensions must be positive");
    if (r.remaining() < m * n * spip_row_bytes(n)) {
        throw FormatError(r.offset() + r.remaining(), "truncated SPIP payload");
    }
    std::vector<std::int8_t> e(m * n * n);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t b = 0; b < spip_row_bytes(n); ++b) {
                const std::uint8_t byte = r.u8("pattern row");
                for (std::size_t bit = 0; bit < 8; ++bit) {
                    const std::size_t x = b * 8 + bit;
                    if (x < n) e[k * n * n + y * n + x] = (byte & (0x80u >> bit)) ? 1 : -1;
                }
            }
    r.expect_end();
    return {m, n, std::move(e)};
}

inline void write_patterns(const std::string& path, const PatternStack& stack) {
    binio::Writer w;
    const auto bytes = encode_patterns(stack);
    w.bytes(std::string_view(bytes.data(), bytes.size()));
    w.save(path);
}

inline PatternStack read_patterns(const std::string& path) {
    auto r = binio::Reader::load(path);
    return decode_patterns(r);
}

} // namespace spix

// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Virtual single-pixel camera. A +-1 pattern cannot be shown on a 0/1
// micromirror device directly, so each pattern is realized as two
// complementary masks P+ = (phi+1)/2 and P- = (1-phi)/2 whose photodiode
// readings are subtracted. Also: scattering-medium degradation of scenes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "spix/binio.hpp"
#include "spix/error.hpp"
#include "spix/image.hpp"
#include "spix/sampler.hpp"
#include "spix/scene.hpp"

namespace spix {

enum class AcquisitionScheme {
    differential, // two complementary readings per pattern
    calibrated,   // one P+ reading per pattern plus a single all-on frame
};

inline AcquisitionScheme parse_acquisition_scheme(const std::string& s) {
    if (s == "differential") return AcquisitionScheme::differential;
    if (s == "calibrated") return AcquisitionScheme::calibrated;
    throw ParameterError("unknown acquisition scheme '" + s + "'");
}

inline const char* to_string(AcquisitionScheme s) {
    return s == AcquisitionScheme::differential ? "differential" : "calibrated";
}

struct NoiseConfig {
    // Standard deviation of the additive noise on every photodiode reading,
    // in units of the mean |y| of the noise-free acquisition.
    double gaussian_sigma = 0.0;
    std::optional<unsigned> quantization_bits;
    std::uint64_t seed = 0;
    AcquisitionScheme scheme = AcquisitionScheme::differential;

    void validate() const {
        if (!(gaussian_sigma >= 0.0) || !std::isfinite(gaussian_sigma)) throw ParameterError("gaussian_sigma must be >= 0");
        if (quantization_bits && (*quantization_bits < 1 || *quantization_bits > 52)) {
            throw ParameterError("quantization_bits must lie in [1, 52]");
        }
    }
};

// Raw detector readings behind one acquisition. Under the calibrated scheme
// `minus` is derived as (all-on frame) - plus.
struct AcquisitionTrace {
    std::vector<double> plus, minus, y;
    double all_on = 0.0;      // calibrated scheme only
    double noise_scale = 0.0; // absolute standard deviation applied per reading
};

namespace detail {

inline double quantize_reading(double r, double full_scale, unsigned bits) {
    const double step = full_scale / std::ldexp(1.0, static_cast<int>(bits));
    return std::clamp(std::round(r / step), 0.0, std::ldexp(1.0, static_cast<int>(bits))) * step;
}

} // namespace detail

inline AcquisitionTrace acquire_trace(const Image& scene, const PatternStack& patterns, const NoiseConfig& noise) {
    noise.validate();
    if (!scene.square() || scene.height != patterns.side()) {
        throw DimensionError("acquire: scene " + std::to_string(scene.height) + "x" + std::to_string(scene.width) +
                             " vs pattern side " + std::to_string(patterns.side()));
    }
    const std::size_t count = patterns.count();
    const std::size_t n = patterns.pixels();
    AcquisitionTrace t{std::vector<double>(count), std::vector<double>(count), std::vector<double>(count), 0.0, 0.0};

    CompensatedSum total;
    for (double v : scene.pixels) total.add(v);
    t.all_on = total.value();
    for (std::size_t m = 0; m < count; ++m) {
        const std::int8_t* row = patterns.entries().data() + m * n;
        CompensatedSum plus, minus;
        for (std::size_t p = 0; p < n; ++p) (row[p] > 0 ? plus : minus).add(scene.pixels[p]);
        t.plus[m] = plus.value();
        t.minus[m] = minus.value();
    }

    if (noise.gaussian_sigma > 0.0) {
        double mean_abs = 0.0;
        for (std::size_t m = 0; m < count; ++m) mean_abs += std::abs(t.plus[m] - t.minus[m]);
        t.noise_scale = noise.gaussian_sigma * mean_abs / static_cast<double>(count);
        // One stream per pattern so results do not depend on evaluation order;
        // the all-on frame draws from the stream after the last pattern.
        for (std::size_t m = 0; m < count; ++m) {
            std::mt19937_64 rng(derive_seed(noise.seed, m));
            std::normal_distribution<double> d(0.0, t.noise_scale);
            t.plus[m] += d(rng);
            t.minus[m] += d(rng);
        }
        std::mt19937_64 rng(derive_seed(noise.seed, count));
        t.all_on += std::normal_distribution<double>(0.0, t.noise_scale)(rng);
    }
    if (noise.quantization_bits) {
        const double full = static_cast<double>(n);
        for (auto* v : {&t.plus, &t.minus})
            for (double& r : *v) r = detail::quantize_reading(r, full, *noise.quantization_bits);
        t.all_on = detail::quantize_reading(t.all_on, full, *noise.quantization_bits);
    }

    for (std::size_t m = 0; m < count; ++m) {
        if (noise.scheme == AcquisitionScheme::calibrated) {
            t.minus[m] = t.all_on - t.plus[m];
            t.y[m] = 2.0 * t.plus[m] - t.all_on;
        } else {
            t.y[m] = t.plus[m] - t.minus[m];
        }
    }
    return t;
}

inline std::vector<double> acquire(const Image& scene, const PatternStack& patterns, const NoiseConfig& noise = {}) {
    return acquire_trace(scene, patterns, noise).y;
}

// ---------------------------------------------------------------- scattering

struct ScatterConfig {
    double psf_sigma = 0.0;  // pixels
    double base_level = 0.0; // uniform stray light, in [0, 1)

    void validate() const {
        if (!(psf_sigma >= 0.0) || !std::isfinite(psf_sigma)) throw ParameterError("psf_sigma must be >= 0");
        if (!(base_level >= 0.0 && base_level < 1.0)) throw ParameterError("base_level must lie in [0, 1)");
    }
};

// Normalized 1-D Gaussian taps over [-ceil(3 sigma), ceil(3 sigma)].
inline std::vector<double> gaussian_kernel(double sigma) {
    if (sigma == 0.0) return {1.0};
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

// Half-sample symmetric extension (... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    const auto period = static_cast<std::ptrdiff_t>(2 * n);
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

// Separable blur with reflective boundaries; preserves the pixel sum.
inline Image gaussian_blur(const Image& img, double sigma) {
    const std::vector<double> k = gaussian_kernel(sigma);
    if (k.size() == 1) return img;
    const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
    Image tmp(img.height, img.width), out(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                acc += k[static_cast<std::size_t>(d + r)] *
                       img.at(y, reflect_index(static_cast<std::ptrdiff_t>(x) + d, img.width));
            }
            tmp.at(y, x) = acc;
        }
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t d = -r; d <= r; ++d) {
                acc += k[static_cast<std::size_t>(d + r)] *
                       tmp.at(reflect_index(static_cast<std::ptrdiff_t>(y) + d, img.height), x);
            }
            out.at(y, x) = acc;
        }
    return out;
}

inline Image scatter(const Image& scene, const ScatterConfig& cfg) {
    cfg.validate();
    Image out = gaussian_blur(scene, cfg.psf_sigma);
    for (double& v : out.pixels) v = std::clamp(v + cfg.base_level, 0.0, 1.0);
    return out;
}

// ---------------------------------------------------------------- SPIM files
//
// "SPIM" | u32 version=1 | u32 M | M little-endian doubles.

inline constexpr std::uint32_t kSpimVersion = 1;

inline std::vector<char> encode_measurements(std::span<const double> y) {
    binio::Writer w;
    w.bytes("SPIM");
    w.u32(kSpimVersion);
    w.u32(static_cast<std::uint32_t>(y.size()));
    for (double v : y) w.f64(v);
    return w.buffer();
}

inline std::vector<double> decode_measurements(binio::Reader& r) {
    r.expect_magic("SPIM");
    const std::uint64_t version_at = r.offset();
    if (r.u32("version") != kSpimVersion) throw FormatError(version_at, "unsupported SPIM version");
    const std::size_t m = r.u32("measurement count");
    if (r.remaining() < 8 * m) throw FormatError(r.offset() + r.remaining(), "truncated SPIM payload");
    std::vector<double> y(m);
    for (double& v : y) v = r.f64("measurement");
    r.expect_end();
    return y;
}

inline void write_measurements(const std::string& path, std::span<const double> y) {
    binio::Writer w;
    const auto bytes = encode_measurements(y);
    w.bytes(std::string_view(bytes.data(), bytes.size()));
    w.save(path);
}

inline std::vector<double> read_measurements(const std::string& path) {
    auto r = binio::Reader::load(path);
    return decode_measurements(r);
}

inline std::string measurements_csv(std::span<const double> y) {
    std::ostringstream os;
    os << "index,value\n";
    char buf[40];
    for (std::size_t i = 0; i < y.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", y[i]);
        os << i << ',' << buf << '\n';
    }
    return os.str();
}

} // namespace spix

// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <cmath>

#include "spix/compensated.hpp"
#include "spix/error.hpp"
#include "spix/image.hpp"

namespace spix {

inline constexpr double kPsnrCap = 99.0;
inline constexpr std::size_t kSsimWindow = 8;

inline double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    // Compensated: the loss is finite-differenced at 1e-6 steps, where a
    // naive 1024-term sum loses the low bits that carry the difference.
    CompensatedSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        acc.add(d * d);
    }
    return acc.value() / static_cast<double>(a.size());
}

// 10 log10(peak^2 / MSE), capped at 99 dB (which also covers MSE = 0).
inline double psnr(const Image& a, const Image& b, double peak = 1.0) {
    const double e = mse(a, b);
    if (e == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

// Mean SSIM over every 8x8 window (stride 1, uniform weights, population
// statistics) on unit dynamic range.
inline double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    const std::size_t w = kSsimWindow;
    if (a.height < w || a.width < w) {
        throw DimensionError("ssim needs at least " + std::to_string(w) + "x" + std::to_string(w) + " pixels");
    }
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    const double inv = 1.0 / static_cast<double>(w * w);
    double total = 0.0;
    for (std::size_t y0 = 0; y0 + w <= a.height; ++y0) {
        for (std::size_t x0 = 0; x0 + w <= a.width; ++x0) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t y = y0; y < y0 + w; ++y) {
                for (std::size_t x = x0; x < x0 + w; ++x) {
                    const double va = a.at(y, x), vb = b.at(y, x);
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            const double ma = sa * inv, mb = sb * inv;
            const double va = saa * inv - ma * ma;
            const double vb = sbb * inv - mb * mb;
            const double cov = sab * inv - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    return total / static_cast<double>((a.height - w + 1) * (a.width - w + 1));
}

// Mean squared intensity over the distractor mask divided by the same over
// the target mask. Masks are "nonzero means inside".
inline double selectivity(const Image& recon, const Image& target_mask, const Image& distractor_mask) {
    require_same_shape(recon, target_mask, "selectivity");
    require_same_shape(recon, distractor_mask, "selectivity");
    double st = 0, sd = 0;
    std::size_t nt = 0, nd = 0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const bool in_t = target_mask.pixels[i] != 0.0;
        const bool in_d = distractor_mask.pixels[i] != 0.0;
        if (in_t && in_d) throw ParameterError("selectivity: target and distractor masks overlap at pixel " + std::to_string(i));
        const double e = recon.pixels[i] * recon.pixels[i];
        if (in_t) st += e, ++nt;
        if (in_d) sd += e, ++nd;
    }
    if (nt == 0) throw ParameterError("selectivity: target mask is empty");
    if (nd == 0 || sd == 0.0) return 0.0;
    const double mt = st / static_cast<double>(nt);
    const double md = sd / static_cast<double>(nd);
    if (mt == 0.0) throw NumericalError("selectivity: reconstruction is zero on the whole target mask");
    return md / mt;
}

} // namespace spix

// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#pragma once

#include <cmath>

namespace spix {

// Neumaier-compensated running sum; keeps long pixel sums within an ulp or
// two of the exact value so alternative acquisition paths agree to 1e-12.
class CompensatedSum {
public:
    void add(double v) noexcept {
        const double t = sum_ + v;
        comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace spix

// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Mutual coherence of a measurement matrix: the largest |cosine| between two
// distinct columns. For a pattern stack the matrix is M x N^2, one row per
// pattern, so column i collects pixel i across all patterns.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "spix/error.hpp"
#include "spix/sampler.hpp"

namespace spix {

struct CoherenceReport {
    double mu = 0.0;
    double welch_lower = 0.0;
    std::size_t rows = 0, cols = 0;
    std::size_t col_i = 0, col_j = 0; // a column pair attaining mu, i < j

    std::string summary() const {
        char buf[160];
        std::snprintf(buf, sizeof buf, "mu=%.17g welch=%.17g M=%zu cols=%zu", mu, welch_lower, rows, cols);
        return buf;
    }
};

// sqrt((cols - rows) / (rows (cols - 1))); zero once rows >= cols.
inline double welch_lower_bound(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols < 2) throw ParameterError("welch bound needs rows >= 1 and cols >= 2");
    if (rows >= cols) return 0.0;
    const double n = static_cast<double>(cols), m = static_cast<double>(rows);
    return std::sqrt((n - m) / (m * (n - 1.0)));
}

// Dense real matrix, row-major rows x cols. Columns are L2-normalized first.
inline CoherenceReport mutual_coherence(std::size_t rows, std::size_t cols, std::span<const double> a) {
    if (cols < 2) throw ParameterError("mutual coherence needs at least 2 columns");
    if (a.size() != rows * cols) throw DimensionError("mutual coherence: matrix data length mismatch");
    std::vector<double> norm(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) norm[c] += a[r * cols + c] * a[r * cols + c];
    for (std::size_t c = 0; c < cols; ++c) {
        if (norm[c] == 0.0) throw ParameterError("mutual coherence: column " + std::to_string(c) + " is zero");
        norm[c] = std::sqrt(norm[c]);
    }
    CoherenceReport rep{0.0, welch_lower_bound(rows, cols), rows, cols, 0, 1};
    bool first = true;
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = i + 1; j < cols; ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < rows; ++r) dot += a[r * cols + i] * a[r * cols + j];
            const double c = std::min(1.0, std::abs(dot) / (norm[i] * norm[j]));
            if (first || c > rep.mu) rep.mu = c, rep.col_i = i, rep.col_j = j, first = false;
        }
    return rep;
}

// +-1 stacks: every column has norm sqrt(M), and <phi_i, phi_j> equals
// M - 2 * (number of disagreeing rows), so the Gram entries come from
// popcounts over bit-packed columns. Exact, all pairs.
inline CoherenceReport mutual_coherence(const PatternStack& stack) {
    const std::size_t rows = stack.count(), cols = stack.pixels();
    if (cols < 2) throw ParameterError("mutual coherence needs at least 2 columns");
    const std::size_t words = (rows + 63) / 64;
    std::vector<std::uint64_t> packed(cols * words, 0);
    for (std::size_t m = 0; m < rows; ++m)
        for (std::size_t p = 0; p < cols; ++p)
            if (stack.at(m, p) > 0) packed[p * words + m / 64] |= std::uint64_t{1} << (m % 64);

    CoherenceReport rep{0.0, welch_lower_bound(rows, cols), rows, cols, 0, 1};
    std::int64_t best = -1;
    const auto total = static_cast<std::int64_t>(rows);
    for (std::size_t i = 0; i < cols; ++i) {
        const std::uint64_t* ci = packed.data() + i * words;
        for (std::size_t j = i + 1; j < cols; ++j) {
            const std::uint64_t* cj = packed.data() + j * words;
            std::int64_t differ = 0;
            for (std::size_t w = 0; w < words; ++w) differ += std::popcount(ci[w] ^ cj[w]);
            const std::int64_t dot = std::abs(total - 2 * differ);
            if (dot > best) best = dot, rep.col_i = i, rep.col_j = j;
        }
    }
    rep.mu = static_cast<double>(best) / static_cast<double>(rows);
    return rep;
}

} // namespace spix

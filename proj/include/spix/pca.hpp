// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Linear baseline: principal components of the training labels serve as a
// dictionary; a scene's measurements are explained by least squares in the
// measured dictionary, and the label estimate is mean + basis * coefficients.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "spix/error.hpp"
#include "spix/image.hpp"
#include "spix/sampler.hpp"
#include "spix/trainer.hpp"

namespace spix {

struct PcaBasis {
    std::size_t side = 0;
    Eigen::VectorXd mean;  // N^2
    Eigen::MatrixXd basis; // N^2 x k, orthonormal columns, by decreasing variance
    Eigen::VectorXd singular_values;
};

// Rank of the centered label matrix with the usual relative threshold.
inline std::size_t pca_rank(const Eigen::VectorXd& sv, std::size_t rows, std::size_t cols) {
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double tol = sv(0) * static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
    return static_cast<std::size_t>((sv.array() > tol).count());
}

inline PcaBasis fit_pca(const std::vector<const Image*>& labels, std::size_t components) {
    if (labels.empty()) throw ParameterError("fit_pca: no training labels");
    const std::size_t side = labels.front()->height;
    const std::size_t p = side * side;
    if (components > std::min(labels.size(), p)) {
        throw ParameterError("fit_pca: " + std::to_string(components) + " components exceed min(train count " +
                             std::to_string(labels.size()) + ", pixels " + std::to_string(p) + ")");
    }
    Eigen::MatrixXd x(labels.size(), p);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]->height != side || !labels[i]->square()) throw DimensionError("fit_pca: labels differ in size");
        x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(labels[i]->pixels.data(), p);
    }
    PcaBasis b;
    b.side = side;
    b.mean = x.colwise().mean().transpose();
    x.rowwise() -= b.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    b.singular_values = svd.singularValues();
    b.basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(components));
    return b;
}

// Least-squares decoder for one pattern stack and basis.
class PcaReconstructor {
public:
    static constexpr double kMaxCondition = 1e12;

    PcaReconstructor(PcaBasis basis, const PatternStack& patterns) : basis_(std::move(basis)) {
        if (patterns.side() != basis_.side) throw DimensionError("pca: pattern side differs from label side");
        const auto m = static_cast<Eigen::Index>(patterns.count());
        const auto p = static_cast<Eigen::Index>(patterns.pixels());
        phi_.resize(m, p);
        for (Eigen::Index r = 0; r < m; ++r)
            for (Eigen::Index c = 0; c < p; ++c)
                phi_(r, c) = patterns.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
        measured_mean_ = phi_ * basis_.mean;
        const Eigen::MatrixXd dict = phi_ * basis_.basis;
        if (dict.cols() == 0) return;
        if (dict.cols() > dict.rows()) {
            throw NumericalError("pca: dictionary is rank deficient (" + std::to_string(dict.cols()) +
                                 " components from " + std::to_string(dict.rows()) + " measurements)");
        }
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(dict).singularValues();
        condition_ = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
        if (!(condition_ <= kMaxCondition)) {
            throw NumericalError("pca: measured dictionary condition number " + std::to_string(condition_) +
                                 " exceeds " + std::to_string(kMaxCondition));
        }
        qr_.compute(dict);
    }

    double condition() const noexcept { return condition_; }
    const PcaBasis& basis() const noexcept { return basis_; }

    Image reconstruct(std::span<const double> y) const {
        if (static_cast<Eigen::Index>(y.size()) != phi_.rows()) {
            throw DimensionError("pca: expected " + std::to_string(phi_.rows()) + " measurements, got " + std::to_string(y.size()));
        }
        Eigen::VectorXd est = basis_.mean;
        if (basis_.basis.cols() > 0) {
            const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(y.data(), phi_.rows()) - measured_mean_;
            est += basis_.basis * qr_.solve(r);
        }
        Image out(basis_.side, basis_.side);
        for (std::size_t i = 0; i < out.size(); ++i) out.pixels[i] = std::clamp(est(static_cast<Eigen::Index>(i)), 0.0, 1.0);
        return out;
    }

private:
    PcaBasis basis_;
    Eigen::MatrixXd phi_;
    Eigen::VectorXd measured_mean_;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
    double condition_ = 1.0;
};

struct PcaReport {
    std::size_t components = 0, measurements = 0;
    double condition = 1.0;
    EvalReport eval;
};

// Random +-1 patterns drawn from `seed`, or `patterns` when given.
inline PcaReport pca_baseline(const Dataset& data, double rate, std::size_t components, std::uint64_t seed,
                              Split split = Split::validation, const PatternStack* patterns = nullptr) {
    std::vector<const Image*> labels;
    for (std::size_t i : data.train) labels.push_back(&data.samples.at(i).label);
    PatternStack drawn;
    if (!patterns) {
        std::mt19937_64 rng(derive_seed(seed, 7));
        drawn = PatternStack::random(measurement_count(rate, data.side), data.side, rng);
        patterns = &drawn;
    }
    PcaReconstructor rec(fit_pca(labels, components), *patterns);
    PcaReport rep{components, patterns->count(), rec.condition(), {}};
    rep.eval = evaluate_with([&](const Sample& s) { return rec.reconstruct(measure(*patterns, s.scene)); }, data,
                             split_indices(data, split));
    return rep;
}

} // namespace spix

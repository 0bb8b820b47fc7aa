// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Toy verification of object selection in feature space. Objects are sums of
// orthonormal feature vectors; the selecting matrix keeps the (weighted)
// feature rows of the target's subspace, and the target is read back as
// Phi0^T Phi0 f. Selection is exact iff the target subspace is orthogonal to
// every other object.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "spix/error.hpp"

namespace spix {

struct FeatureSpaceInstance {
    Eigen::MatrixXd features;                         // K x D, orthonormal rows
    std::vector<std::vector<std::size_t>> subspaces;  // feature rows used by each object
    std::vector<Eigen::VectorXd> coefficients;        // parallel to subspaces
    Eigen::VectorXd weights;                          // one per target feature; object 0 is the target

    std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }

    Eigen::VectorXd object(std::size_t i) const {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(features.cols());
        for (std::size_t j = 0; j < subspaces.at(i).size(); ++j) {
            f += coefficients[i](static_cast<Eigen::Index>(j)) * features.row(static_cast<Eigen::Index>(subspaces[i][j])).transpose();
        }
        return f;
    }

    Eigen::VectorXd scene() const {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(features.cols());
        for (std::size_t i = 0; i < subspaces.size(); ++i) f += object(i);
        return f;
    }

    // Rows of the selecting matrix: weighted target features.
    Eigen::MatrixXd selector() const {
        Eigen::MatrixXd phi(static_cast<Eigen::Index>(subspaces.at(0).size()), features.cols());
        for (std::size_t k = 0; k < subspaces[0].size(); ++k) {
            phi.row(static_cast<Eigen::Index>(k)) =
                weights(static_cast<Eigen::Index>(k)) * features.row(static_cast<Eigen::Index>(subspaces[0][k]));
        }
        return phi;
    }

    void validate(double tol = 1e-12) const {
        if (subspaces.empty() || subspaces[0].empty()) throw ValidationError("featurespace: target subspace is empty");
        if (coefficients.size() != subspaces.size()) throw DimensionError("featurespace: one coefficient vector per object");
        if (weights.size() != static_cast<Eigen::Index>(subspaces[0].size())) {
            throw DimensionError("featurespace: one weight per target feature");
        }
        for (std::size_t i = 0; i < subspaces.size(); ++i) {
            if (coefficients[i].size() != static_cast<Eigen::Index>(subspaces[i].size())) {
                throw DimensionError("featurespace: object " + std::to_string(i) + " coefficient count");
            }
            for (std::size_t k : subspaces[i])
                if (k >= static_cast<std::size_t>(features.rows())) throw DimensionError("featurespace: feature index out of range");
        }
        const Eigen::MatrixXd gram = features * features.transpose();
        const double dev = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
        if (!(dev <= tol)) throw ValidationError("featurespace: features are not orthonormal (max |G - I| = " + std::to_string(dev) + ")");
    }
};

struct SelectionResult {
    Eigen::VectorXd recovered;
    double leakage = 0.0; // ||recovered - f0|| / ||f0||
};

inline SelectionResult featurespace_select(const FeatureSpaceInstance& inst) {
    inst.validate();
    const Eigen::MatrixXd phi = inst.selector();
    const Eigen::VectorXd f0 = inst.object(0);
    const double norm0 = f0.norm();
    if (norm0 == 0.0) throw ValidationError("featurespace: target object is zero");
    SelectionResult r;
    r.recovered = phi.transpose() * (phi * inst.scene());
    r.leakage = (r.recovered - f0).norm() / norm0;
    return r;
}

// Random orthonormal feature rows: Q factor of a Gaussian D x D matrix.
inline Eigen::MatrixXd random_orthonormal_features(std::size_t dim, std::size_t count, std::mt19937_64& rng) {
    if (count > dim) throw ParameterError("featurespace: more features than dimensions");
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(dim, dim);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
    return q.leftCols(static_cast<Eigen::Index>(count)).transpose();
}

// `objects` objects, each on `per_object` features of its own. With
// `shared` > 0, every non-target object also uses the first `shared` target
// features, so the subspaces overlap.
inline FeatureSpaceInstance make_featurespace_instance(std::size_t dim, std::size_t objects, std::size_t per_object,
                                                       std::size_t shared, std::uint64_t seed) {
    if (objects == 0 || per_object == 0) throw ParameterError("featurespace: need at least one object and feature");
    if (shared > per_object) throw ParameterError("featurespace: shared features exceed target features");
    std::mt19937_64 rng(seed);
    FeatureSpaceInstance inst;
    inst.features = random_orthonormal_features(dim, objects * per_object, rng);
    std::uniform_real_distribution<double> coef(0.5, 1.5);
    for (std::size_t i = 0; i < objects; ++i) {
        std::vector<std::size_t> idx;
        for (std::size_t k = 0; k < per_object; ++k) idx.push_back(i * per_object + k);
        if (i > 0)
            for (std::size_t k = 0; k < shared; ++k) idx.push_back(k);
        Eigen::VectorXd c(static_cast<Eigen::Index>(idx.size()));
        for (Eigen::Index k = 0; k < c.size(); ++k) c(k) = coef(rng);
        inst.subspaces.push_back(std::move(idx));
        inst.coefficients.push_back(std::move(c));
    }
    inst.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(per_object));
    return inst;
}

// True when no other object uses any of the target's features.
inline bool target_isolated(const FeatureSpaceInstance& inst) {
    const std::set<std::size_t> target(inst.subspaces.at(0).begin(), inst.subspaces[0].end());
    for (std::size_t i = 1; i < inst.subspaces.size(); ++i)
        for (std::size_t k : inst.subspaces[i])
            if (target.count(k)) return false;
    return true;
}

} // namespace spix

// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "common.hpp"

using namespace spix;
using namespace spix::testing;

namespace {

// Two-pass window statistics, written independently of the library's
// running sums.
double ssim_oracle(const Image& a, const Image& b) {
    const std::size_t w = 8;
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t y0 = 0; y0 + w <= a.height; ++y0)
        for (std::size_t x0 = 0; x0 + w <= a.width; ++x0) {
            std::vector<double> va, vb;
            for (std::size_t y = y0; y < y0 + w; ++y)
                for (std::size_t x = x0; x < x0 + w; ++x) {
                    va.push_back(a.at(y, x));
                    vb.push_back(b.at(y, x));
                }
            const double n = static_cast<double>(va.size());
            const double ma = std::accumulate(va.begin(), va.end(), 0.0) / n;
            const double mb = std::accumulate(vb.begin(), vb.end(), 0.0) / n;
            double sa = 0, sb = 0, sab = 0;
            for (std::size_t i = 0; i < va.size(); ++i) {
                sa += (va[i] - ma) * (va[i] - ma);
                sb += (vb[i] - mb) * (vb[i] - mb);
                sab += (va[i] - ma) * (vb[i] - mb);
            }
            sa /= n, sb /= n, sab /= n;
            const double c1 = 1e-4, c2 = 9e-4;
            total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
            ++windows;
        }
    return total / static_cast<double>(windows);
}

double dense_mu(const PatternStack& s) {
    Eigen::MatrixXd a(s.count(), s.pixels());
    for (std::size_t m = 0; m < s.count(); ++m)
        for (std::size_t p = 0; p < s.pixels(); ++p) a(m, p) = s.at(m, p);
    a.colwise().normalize();
    Eigen::MatrixXd g = (a.transpose() * a).cwiseAbs();
    g.diagonal().setZero();
    return g.maxCoeff();
}

Image mask_image(std::size_t n, std::size_t r0, std::size_t r1) {
    Image m(n, n, 0.0);
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = 0; c < n; ++c) m.at(r, c) = 1.0;
    return m;
}

} // namespace

// ---------------------------------------------------------------- metrics

TEST_CASE("psnr: a uniform error of 0.1 is 20 dB; identical images hit the cap") {
    CHECK(std::abs(psnr(Image(16, 16, 0.0), Image(16, 16, 0.1)) - 20.0) <= 1e-9);
    CHECK(psnr(Image(16, 16, 0.4), Image(16, 16, 0.4)) == 99.0);
    CHECK_THROWS_AS(psnr(Image(16, 16), Image(8, 8)), DimensionError);
    std::mt19937_64 rng(1);
    const Image a = random_image(16, rng), b = random_image(16, rng);
    double e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e += (a.pixels[i] - b.pixels[i]) * (a.pixels[i] - b.pixels[i]);
    CHECK(std::abs(psnr(a, b) - (-10.0 * std::log10(e / 256.0))) <= 1e-10);
}

TEST_CASE("ssim: identity, a closed form and a windowed oracle") {
    std::mt19937_64 rng(2);
    const Image a = random_image(16, rng), b = random_image(16, rng);
    CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-12);

    // 8x8 checkerboard against flat grey: one window with means 0.5, variances
    // 0.25 and 0, covariance 0.
    Image board(8, 8), grey(8, 8, 0.5);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) board.at(y, x) = (x + y) % 2 ? 1.0 : 0.0;
    const double c1 = 1e-4, c2 = 9e-4;
    const double closed = (0.5 + c1) * c2 / ((0.5 + c1) * (0.25 + c2));
    CHECK(std::abs(ssim(board, grey) - closed) <= 1e-12);

    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-10);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-14);
    CHECK_THROWS_AS(ssim(Image(4, 4), Image(4, 4)), DimensionError);
}

TEST_CASE("selectivity: ratios, zero leakage and mask errors") {
    const Image target = mask_image(16, 0, 4), distract = mask_image(16, 8, 12);
    Image recon(16, 16, 0.0);
    for (std::size_t i = 0; i < 64; ++i) recon.pixels[i] = 0.8;
    CHECK(selectivity(recon, target, distract) == 0.0);
    for (std::size_t i = 128; i < 192; ++i) recon.pixels[i] = 0.4;
    CHECK(std::abs(selectivity(recon, target, distract) - 0.25) <= 1e-12);
    CHECK_THROWS_AS(selectivity(recon, Image(16, 16, 0.0), distract), ParameterError);
    CHECK_THROWS_AS(selectivity(recon, target, mask_image(16, 2, 6)), ParameterError);
    CHECK(selectivity(Image(16, 16, 0.0), target, distract) == 0.0);
    Image dark_target(16, 16, 0.0);
    for (std::size_t i = 128; i < 192; ++i) dark_target.pixels[i] = 0.4;
    CHECK_THROWS_AS(selectivity(dark_target, target, distract), NumericalError);
}

// ---------------------------------------------------------------- coherence

TEST_CASE("coherence: orthogonal and repeated columns") {
    const std::vector<double> eye{1, 0, 0, 1};
    CHECK(mutual_coherence(2, 2, eye).mu == 0.0);
    const std::vector<double> rep{1, 2, 1, -3, 4, -3};
    const CoherenceReport r = mutual_coherence(2, 3, rep);
    CHECK(std::abs(r.mu - 1.0) <= 1e-15);
    CHECK(r.col_i == 0);
    CHECK(r.col_j == 2);
    CHECK_THROWS_AS(mutual_coherence(2, 2, std::vector<double>{1, 0, 0, 0}), ParameterError);

    const PatternStack h(2, 1, {1, 1});
    CHECK_THROWS_AS(mutual_coherence(h), ParameterError);
    // Hadamard columns are orthogonal.
    const PatternStack had(4, 2, {1, 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, 1, -1, -1, 1});
    CHECK(mutual_coherence(had).mu == 0.0);
}

TEST_CASE("coherence: popcount route matches a dense Gram matrix") {
    std::mt19937_64 rng(3);
    for (std::size_t rows : {1u, 7u, 64u, 70u, 130u}) {
        const PatternStack s = PatternStack::random(rows, 6, rng);
        const CoherenceReport r = mutual_coherence(s);
        CHECK(std::abs(r.mu - dense_mu(s)) <= 1e-12);
        std::vector<double> dense(s.entries().begin(), s.entries().end());
        CHECK(std::abs(mutual_coherence(rows, 36, dense).mu - r.mu) <= 1e-12);
    }
}

TEST_CASE("coherence is invariant to row sign flips and column permutations") {
    std::mt19937_64 rng(4);
    const PatternStack s = PatternStack::random(50, 8, rng);
    const double mu = mutual_coherence(s).mu;
    std::vector<std::int8_t> flipped(s.entries().begin(), s.entries().end());
    for (std::size_t p = 0; p < 64; ++p) flipped[3 * 64 + p] = static_cast<std::int8_t>(-flipped[3 * 64 + p]);
    CHECK(mutual_coherence(PatternStack(50, 8, flipped)).mu == mu);
    std::vector<std::size_t> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::int8_t> permuted(s.entries().size());
    for (std::size_t m = 0; m < 50; ++m)
        for (std::size_t p = 0; p < 64; ++p) permuted[m * 64 + p] = s.at(m, perm[p]);
    CHECK(mutual_coherence(PatternStack(50, 8, permuted)).mu == mu);
}

TEST_CASE("coherence of random 410 x 4096 stacks and the Welch bound") {
    CHECK(std::abs(welch_lower_bound(410, 4096) - 0.0469) <= 5e-5);
    CHECK(welch_lower_bound(10, 10) == 0.0);
    std::mt19937_64 rng(5);
    const CoherenceReport r = mutual_coherence(PatternStack::random(410, 64, rng));
    CHECK(r.mu >= 0.20);
    CHECK(r.mu <= 0.35);
    CHECK(r.mu >= r.welch_lower);
    CHECK(r.summary().rfind("mu=", 0) == 0);
}

// ---------------------------------------------------------------- PCA

TEST_CASE("pca at full rate recovers training labels when k equals their rank") {
    GenConfig cfg;
    cfg.count = 20;
    cfg.canvas = 32;
    cfg.seed = 8;
    const Dataset d = Dataset::from_pairs(generate_pairs(cfg));
    std::vector<const Image*> labels;
    for (std::size_t i : d.train) labels.push_back(&d.samples[i].label);
    const std::size_t rank = pca_rank(fit_pca(labels, 0).singular_values, labels.size(), 1024);
    CHECK(rank >= 1);
    CHECK(rank <= labels.size() - 1);
    std::mt19937_64 rng(3);
    const PatternStack s = PatternStack::random(1024, 32, rng);
    const PcaReconstructor rec(fit_pca(labels, rank), s);
    INFO("rank " << rank << ", condition " << rec.condition());
    for (const Image* l : labels) CHECK(psnr(rec.reconstruct(measure(s, *l)), *l) >= 60.0);

    // The baseline itself measures scenes; at full rate it is still finite and bounded.
    const PcaReport rep = pca_baseline(d, 1.0, rank, 3, Split::train);
    CHECK(rep.measurements == 1024);
    CHECK(std::isfinite(rep.eval.mean_psnr));
}

TEST_CASE("pca with no components returns the mean label") {
    GenConfig cfg;
    cfg.count = 20;
    cfg.canvas = 32;
    const Dataset d = Dataset::from_pairs(generate_pairs(cfg));
    std::vector<const Image*> labels;
    for (std::size_t i : d.train) labels.push_back(&d.samples[i].label);
    std::mt19937_64 rng(1);
    const PatternStack s = PatternStack::random(50, 32, rng);
    PcaReconstructor rec(fit_pca(labels, 0), s);
    const Image out = rec.reconstruct(measure(s, d.samples[0].scene));
    for (std::size_t p = 0; p < out.size(); ++p) {
        double mean = 0.0;
        for (const Image* l : labels) mean += l->pixels[p];
        mean /= static_cast<double>(labels.size());
        CHECK(std::abs(out.pixels[p] - mean) <= 1e-12);
    }
    CHECK_THROWS_AS(fit_pca(labels, labels.size() + 1), ParameterError);
    CHECK_THROWS_AS(rec.reconstruct(std::vector<double>(3)), DimensionError);
    // More components than measurements cannot be solved.
    const PatternStack few = PatternStack::random(4, 32, rng);
    CHECK_THROWS_AS(PcaReconstructor(fit_pca(labels, 10), few), NumericalError);
}

// ---------------------------------------------------------------- feature space

TEST_CASE("featurespace: disjoint subspaces isolate the target exactly") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const FeatureSpaceInstance inst = make_featurespace_instance(64, 4, 6, 0, seed);
        CHECK(target_isolated(inst));
        CHECK(featurespace_select(inst).leakage <= 1e-10);
    }
    const FeatureSpaceInstance single = make_featurespace_instance(16, 1, 5, 0, 9);
    CHECK(featurespace_select(single).leakage <= 1e-12);
}

TEST_CASE("featurespace: overlap leaks exactly the projection of the other objects") {
    const FeatureSpaceInstance inst = make_featurespace_instance(40, 3, 5, 2, 11);
    CHECK_FALSE(target_isolated(inst));
    const SelectionResult r = featurespace_select(inst);
    // Oracle: orthogonal projector onto span of the target features, built by QR.
    Eigen::MatrixXd basis(inst.dim(), inst.subspaces[0].size());
    for (std::size_t k = 0; k < inst.subspaces[0].size(); ++k)
        basis.col(static_cast<Eigen::Index>(k)) = inst.features.row(static_cast<Eigen::Index>(inst.subspaces[0][k])).transpose();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(basis).householderQ() *
                              Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
    const Eigen::VectorXd want = q * (q.transpose() * inst.scene());
    CHECK((r.recovered - want).norm() <= 1e-10);
    CHECK(r.leakage > 1e-3);
}

TEST_CASE("featurespace: isolation holds iff no feature is shared") {
    for (std::size_t shared = 0; shared <= 4; ++shared)
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const FeatureSpaceInstance inst = make_featurespace_instance(48, 3, 4, shared, seed);
            CHECK(target_isolated(inst) == (shared == 0));
            CHECK((featurespace_select(inst).leakage <= 1e-10) == (shared == 0));
        }
}

TEST_CASE("featurespace rejects non-orthonormal features") {
    FeatureSpaceInstance inst = make_featurespace_instance(16, 2, 3, 0, 1);
    inst.features.row(1) *= 1.01;
    CHECK_THROWS_AS(featurespace_select(inst), ValidationError);
    CHECK_THROWS_AS(make_featurespace_instance(8, 3, 3, 0, 1), ParameterError);
    CHECK_THROWS_AS(make_featurespace_instance(32, 2, 3, 4, 1), ParameterError);
}

// ---------------------------------------------------------------- sweep

TEST_CASE("rate sweep: one row per rate, descending, with coherence") {
    GenConfig cfg;
    cfg.count = 20;
    cfg.canvas = 32;
    const Dataset d = Dataset::from_pairs(generate_pairs(cfg));
    TrainConfig c;
    c.epochs = 1;
    c.batch = 6;
    std::vector<double> seen;
    const SweepReport r = rate_sweep(d, {0.05, 0.1}, c, [&](double rate, const TrainResult&) { seen.push_back(rate); });
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].rate == 0.1);
    CHECK(r.rows[0].measurements == 102);
    CHECK(r.rows[1].measurements == 51);
    CHECK(seen == std::vector<double>{0.1, 0.05});
    for (const auto& row : r.rows) {
        CHECK(row.mu >= row.welch_lower);
        CHECK(std::isfinite(row.psnr));
    }
    CHECK(r.csv().rfind("rate,M,psnr,ssim,selectivity,mu,welch\n0.10000000000000001,102,", 0) == 0);
    const SweepReport par = rate_sweep(d, {0.05, 0.1}, c, {}, 2);
    CHECK(par.csv() == r.csv());
    CHECK_THROWS_AS(rate_sweep(d, {0.1, 0.1}, c), ParameterError);
    CHECK_THROWS_AS(rate_sweep(d, {0.1}, c, {}, 0), ParameterError);
    CHECK_THROWS_AS(rate_sweep(d, {}, c), ParameterError);
    try {
        rate_sweep(d, {0.1, 2.0}, c);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("rate_sweep at rate 2") != std::string::npos);
    }
}

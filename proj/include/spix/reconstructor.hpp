// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Reconstruction sub-network. The M readings are lifted to an N x N map by a
// dense linear layer (a 1x1 convolution over an M-channel 1x1 input), then a
// three-level U-net refines the map into the target-only image:
//
//   enc1 3x3 1->16 ─────────────────────────────────────┐ skip
//    └ pool ─ enc2 3x3 16->32 ───────────────────┐ skip  │
//              └ pool ─ enc3 3x3 32->64 ─┐ skip  │       │
//                        └ pool ─ bottleneck 64->64      │
//                                   up ┴ dec3 128->64    │
//                                          up ┴ dec2 96->32
//                                                  up ┴ dec1 48->16
//                                                           head 1x1 16->1, sigmoid

#pragma once

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spix/error.hpp"
#include "spix/image.hpp"
#include "spix/kernels.hpp"
#include "spix/tensor.hpp"

namespace spix {

enum UNetLayer : std::size_t { kEnc1, kEnc2, kEnc3, kBottleneck, kDec3, kDec2, kDec1, kHead, kUNetLayers };

inline constexpr std::array<const char*, kUNetLayers> kUNetLayerNames{"enc1", "enc2", "enc3", "bottleneck",
                                                                     "dec3", "dec2", "dec1", "head"};
inline constexpr std::array<std::size_t, 3> kUNetWidths{16, 32, 64};

struct ReconParams {
    std::size_t side = 0;         // N
    std::size_t measurements = 0; // M
    Tensor expand_weight;         // {N*N, M}
    Tensor expand_bias;           // {N*N}
    std::vector<LayerParams> unet;

    // Layer shapes as {C_out, C_in, k}.
    static std::array<std::array<std::size_t, 3>, kUNetLayers> layer_shapes() {
        const auto [w1, w2, w3] = kUNetWidths;
        return {{{w1, 1, 3}, {w2, w1, 3}, {w3, w2, 3}, {w3, w3, 3},
                 {w3, 2 * w3, 3}, {w2, w3 + w2, 3}, {w1, w2 + w1, 3}, {1, w1, 1}}};
    }

    static ReconParams zeros(std::size_t side, std::size_t measurements) {
        if (side == 0 || side % 8) throw DimensionError("reconstructor side must be a positive multiple of 8, got " + std::to_string(side));
        if (measurements == 0) throw DimensionError("reconstructor needs at least one measurement");
        ReconParams p{side, measurements, Tensor({side * side, measurements}), Tensor({side * side}), {}};
        for (std::size_t l = 0; l < kUNetLayers; ++l) {
            const auto [co, ci, k] = layer_shapes()[l];
            p.unet.push_back({Tensor({co, ci, k, k}), Tensor({co}), l == kHead ? Activation::sigmoid : Activation::relu});
        }
        return p;
    }

    // Centered uniform weights scaled by fan-in, zero biases.
    static ReconParams init(std::size_t side, std::size_t measurements, std::mt19937_64& rng) {
        ReconParams p = zeros(side, measurements);
        auto fill = [&](Tensor& t, double a) {
            std::uniform_real_distribution<double> u(-a, a);
            for (double& v : t.data()) v = u(rng);
        };
        fill(p.expand_weight, std::sqrt(3.0 / static_cast<double>(measurements)));
        for (std::size_t l = 0; l < kUNetLayers; ++l) {
            const auto [co, ci, k] = layer_shapes()[l];
            const double fan_in = static_cast<double>(ci * k * k);
            fill(p.unet[l].weight, std::sqrt((l == kHead ? 3.0 : 6.0) / fan_in));
        }
        return p;
    }

    void validate() const {
        if (expand_weight.shape() != Shape{side * side, measurements} || expand_bias.shape() != Shape{side * side}) {
            throw DimensionError("expansion layer must be N^2 x M with N^2 bias");
        }
        if (unet.size() != kUNetLayers) throw DimensionError("U-net needs exactly " + std::to_string(kUNetLayers) + " layers");
        for (std::size_t l = 0; l < kUNetLayers; ++l) {
            unet[l].validate();
            const auto [co, ci, k] = layer_shapes()[l];
            if (unet[l].weight.shape() != Shape{co, ci, k, k}) {
                throw DimensionError(std::string("U-net layer ") + kUNetLayerNames[l] + " has shape " +
                                     shape_string(unet[l].weight.shape()));
            }
        }
    }
};

// Readings are divided by N before the expansion: a +-1 reading of an N x N
// scene grows like N, and unscaled inputs make the first Adam steps move the
// map by O(lr * M * N).
inline double reading_scale(std::size_t side) { return 1.0 / static_cast<double>(side); }

// map = reshape(W_e (y / N) + b_e, N x N); linear, no activation.
inline Tensor expand(std::span<const double> y, const ReconParams& params) {
    if (y.size() != params.measurements) {
        throw DimensionError("expand: got " + std::to_string(y.size()) + " readings, layer expects " +
                             std::to_string(params.measurements));
    }
    const auto rows = static_cast<Eigen::Index>(params.side * params.side);
    const auto cols = static_cast<Eigen::Index>(params.measurements);
    Tensor map({1, params.side, params.side});
    detail::ConstRowMap w(params.expand_weight.data().data(), rows, cols);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), cols);
    Eigen::Map<const Eigen::VectorXd> b(params.expand_bias.data().data(), rows);
    Eigen::Map<Eigen::VectorXd> out(map.data().data(), rows);
    out.noalias() = reading_scale(params.side) * (w * yv);
    out += b;
    return map;
}

struct ExpandGrads {
    Tensor weight;
    Tensor bias;
    std::vector<double> readings;
};

inline ExpandGrads expand_backward(std::span<const double> y, const ReconParams& params, const Tensor& grad_map) {
    const auto rows = static_cast<Eigen::Index>(params.side * params.side);
    const auto cols = static_cast<Eigen::Index>(params.measurements);
    if (grad_map.size() != static_cast<std::size_t>(rows) || y.size() != params.measurements) {
        throw DimensionError("expand_backward: inconsistent gradient or reading length");
    }
    ExpandGrads g{Tensor(params.expand_weight.shape()), Tensor(params.expand_bias.shape()),
                  std::vector<double>(params.measurements)};
    Eigen::Map<const Eigen::VectorXd> gm(grad_map.data().data(), rows);
    Eigen::Map<const Eigen::VectorXd> yv(y.data(), cols);
    detail::RowMap gw(g.weight.data().data(), rows, cols);
    gw.noalias() = reading_scale(params.side) * (gm * yv.transpose());
    std::copy(grad_map.data().begin(), grad_map.data().end(), g.bias.data().begin());
    detail::ConstRowMap w(params.expand_weight.data().data(), rows, cols);
    Eigen::Map<Eigen::VectorXd> gy(g.readings.data(), cols);
    gy.noalias() = reading_scale(params.side) * (w.transpose() * gm);
    return g;
}

struct UNetOptions {
    // Replace the skip tensor of level i (0 = finest) by zeros. Diagnostic
    // only: shows that the decoder really consumes the encoder features.
    std::array<bool, 3> drop_skip{false, false, false};
};

// Every intermediate the backward pass needs.
struct UNetTape {
    Tensor input;
    std::array<Tensor, kUNetLayers> out; // post-activation output of each conv
    std::array<Tensor, 3> pooled;        // down(enc1), down(enc2), down(enc3)
    std::array<Tensor, 3> concat;        // decoder inputs, finest level first
    UNetOptions options;
};

namespace detail {

inline Tensor skip_or_zero(const Tensor& t, bool drop) { return drop ? Tensor::zeros_like(t) : t; }

inline std::size_t pad_for(const LayerParams& l) { return l.kernel() / 2; }

} // namespace detail

inline UNetTape unet_forward_tape(const Tensor& map, const ReconParams& params, UNetOptions options = {}) {
    const std::size_t n = params.side;
    if (map.rank() != 3 || map.dim(0) != 1 || map.dim(1) != map.dim(2)) {
        throw DimensionError("unet_forward expects a 1 x N x N map, got " + shape_string(map.shape()));
    }
    if (map.dim(1) % 8) throw DimensionError("unet_forward: side " + std::to_string(map.dim(1)) + " not divisible by 8");
    if (map.dim(1) != n) throw DimensionError("unet_forward: map side differs from parameter side " + std::to_string(n));
    const auto& L = params.unet;
    UNetTape t;
    t.input = map;
    t.options = options;
    auto conv = [&](const Tensor& x, std::size_t l) { return conv2d(x, L[l], 1, detail::pad_for(L[l])); };

    t.out[kEnc1] = conv(map, kEnc1);
    t.pooled[0] = resample2x(t.out[kEnc1], Resample::down_max);
    t.out[kEnc2] = conv(t.pooled[0], kEnc2);
    t.pooled[1] = resample2x(t.out[kEnc2], Resample::down_max);
    t.out[kEnc3] = conv(t.pooled[1], kEnc3);
    t.pooled[2] = resample2x(t.out[kEnc3], Resample::down_max);
    t.out[kBottleneck] = conv(t.pooled[2], kBottleneck);

    t.concat[2] = concat_channels(resample2x(t.out[kBottleneck], Resample::up_nearest),
                                  detail::skip_or_zero(t.out[kEnc3], options.drop_skip[2]));
    t.out[kDec3] = conv(t.concat[2], kDec3);
    t.concat[1] = concat_channels(resample2x(t.out[kDec3], Resample::up_nearest),
                                  detail::skip_or_zero(t.out[kEnc2], options.drop_skip[1]));
    t.out[kDec2] = conv(t.concat[1], kDec2);
    t.concat[0] = concat_channels(resample2x(t.out[kDec2], Resample::up_nearest),
                                  detail::skip_or_zero(t.out[kEnc1], options.drop_skip[0]));
    t.out[kDec1] = conv(t.concat[0], kDec1);
    t.out[kHead] = conv(t.out[kDec1], kHead);
    return t;
}

inline Image unet_forward(const Tensor& map, const ReconParams& params, UNetOptions options = {}) {
    return Image::from_tensor(unet_forward_tape(map, params, options).out[kHead]);
}

struct LayerGrads {
    Tensor weight;
    Tensor bias;
};

struct UNetGrads {
    Tensor input;
    std::vector<LayerGrads> layers;
};

// Gradients of a scalar loss given dLoss/dOutput (1 x N x N).
inline UNetGrads unet_backward(const UNetTape& t, const ReconParams& params, const Tensor& grad_output) {
    const auto& L = params.unet;
    UNetGrads g{Tensor(), std::vector<LayerGrads>(kUNetLayers)};
    auto back = [&](const Tensor& x, std::size_t l, const Tensor& gy) {
        ConvGrads c = conv2d_backward(x, L[l], t.out[l], gy, 1, detail::pad_for(L[l]));
        g.layers[l] = {std::move(c.weight), c.bias ? std::move(*c.bias) : Tensor({L[l].out_channels()})};
        return std::move(c.input);
    };
    auto skip_grad = [&](Tensor gs, std::size_t level) {
        if (t.options.drop_skip[level]) gs.fill(0.0);
        return gs;
    };

    Tensor gd1 = back(t.out[kDec1], kHead, grad_output);
    Tensor gc0 = back(t.concat[0], kDec1, gd1);
    auto [gu1, gs1] = split_channels(gc0, t.out[kDec2].dim(0));
    Tensor gd2 = resample2x_backward(t.out[kDec2], gu1, Resample::up_nearest);

    Tensor gc1 = back(t.concat[1], kDec2, gd2);
    auto [gu2, gs2] = split_channels(gc1, t.out[kDec3].dim(0));
    Tensor gd3 = resample2x_backward(t.out[kDec3], gu2, Resample::up_nearest);

    Tensor gc2 = back(t.concat[2], kDec3, gd3);
    auto [gu3, gs3] = split_channels(gc2, t.out[kBottleneck].dim(0));
    Tensor gb = resample2x_backward(t.out[kBottleneck], gu3, Resample::up_nearest);

    Tensor gp3 = back(t.pooled[2], kBottleneck, gb);
    Tensor ge3 = resample2x_backward(t.out[kEnc3], gp3, Resample::down_max);
    axpy(ge3, skip_grad(std::move(gs3), 2));

    Tensor gp2 = back(t.pooled[1], kEnc3, ge3);
    Tensor ge2 = resample2x_backward(t.out[kEnc2], gp2, Resample::down_max);
    axpy(ge2, skip_grad(std::move(gs2), 1));

    Tensor gp1 = back(t.pooled[0], kEnc2, ge2);
    Tensor ge1 = resample2x_backward(t.out[kEnc1], gp1, Resample::down_max);
    axpy(ge1, skip_grad(std::move(gs1), 0));

    g.input = back(t.input, kEnc1, ge1);
    return g;
}

} // namespace spix

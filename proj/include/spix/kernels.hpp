// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Differentiable building blocks. Every forward op has a matching backward
// that maps an upstream gradient to gradients of the op's inputs; the pairs
// are verified against central finite differences in the test suite.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spix/error.hpp"
#include "spix/tensor.hpp"

namespace spix {

enum class Activation { none, relu, sigmoid };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor activation_apply(const Tensor& x, Activation kind) {
    Tensor out = x;
    switch (kind) {
        case Activation::none: break;
        case Activation::relu:
            for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::sigmoid:
            for (double& v : out.data()) v = sigmoid(v);
            break;
    }
    return out;
}

// Multiplies grad in place by the activation derivative, expressed through
// the activation's output.
inline void activation_backward_inplace(std::span<double> grad, std::span<const double> output, Activation kind) {
    switch (kind) {
        case Activation::none: break;
        case Activation::relu:
            for (std::size_t i = 0; i < grad.size(); ++i) {
                if (!(output[i] > 0.0)) grad[i] = 0.0;
            }
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (1.0 - output[i]);
            break;
    }
}

inline Tensor activation_backward(const Tensor& grad_out, const Tensor& output, Activation kind) {
    require_same_shape(grad_out, output, "activation_backward");
    Tensor g = grad_out;
    activation_backward_inplace(g.data(), output.data(), kind);
    return g;
}

// Weights are C_out x C_in x k x k; bias, when present, has C_out entries.
struct LayerParams {
    Tensor weight;
    std::optional<Tensor> bias;
    Activation activation = Activation::none;

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t kernel() const { return weight.dim(2); }

    void validate() const {
        if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
            throw DimensionError("conv weight must be C_out x C_in x k x k, got " + shape_string(weight.shape()));
        }
        if (bias && (bias->rank() != 1 || bias->dim(0) != out_channels())) {
            throw DimensionError("conv bias length must equal output channels " + std::to_string(out_channels()));
        }
    }
};

struct ConvGeometry {
    std::size_t channels, height, width, kernel, stride, pad, out_height, out_width;

    static ConvGeometry make(const Tensor& input, const LayerParams& params, std::size_t stride, std::size_t pad) {
        params.validate();
        if (input.rank() != 3) {
            throw DimensionError("conv input must be C x H x W, got " + shape_string(input.shape()));
        }
        if (stride < 1) throw ParameterError("conv stride must be >= 1");
        if (input.dim(0) != params.in_channels()) {
            throw DimensionError("conv axis 0 (channels): input has " + std::to_string(input.dim(0)) +
                                 ", kernel expects " + std::to_string(params.in_channels()));
        }
        const std::size_t k = params.kernel();
        const std::size_t ph = input.dim(1) + 2 * pad;
        const std::size_t pw = input.dim(2) + 2 * pad;
        if (k > ph || k > pw) {
            throw DimensionError("conv axes 1,2 (spatial): kernel " + std::to_string(k) + " exceeds padded input " +
                                 std::to_string(ph) + "x" + std::to_string(pw));
        }
        return {input.dim(0), input.dim(1), input.dim(2), k, stride, pad, (ph - k) / stride + 1, (pw - k) / stride + 1};
    }

    std::size_t patch() const { return channels * kernel * kernel; }
    std::size_t positions() const { return out_height * out_width; }
};

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// Unfolds zero-padded input windows into a (C*k*k) x (Ho*Wo) matrix.
inline std::vector<double> im2col(std::span<const double> in, const ConvGeometry& g) {
    std::vector<double> col(g.patch() * g.positions(), 0.0);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
                double* dst = col.data() + row * g.positions();
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    const double* src = in.data() + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                        dst[oy * g.out_width + ox] = src[ix];
                    }
                }
            }
        }
    }
    return col;
}

// Adjoint of im2col: scatters window gradients back onto the input.
inline void col2im_add(std::span<const double> col, const ConvGeometry& g, std::span<double> out) {
    const auto pad = static_cast<std::ptrdiff_t>(g.pad);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < g.kernel; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
                const double* src = col.data() + row * g.positions();
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                    double* dst = out.data() + (c * g.height + static_cast<std::size_t>(iy)) * g.width;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                        dst[ix] += src[oy * g.out_width + ox];
                    }
                }
            }
        }
    }
}

inline bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1 && g.pad == 0; }

} // namespace detail

// y = act(W * f + b) with zero padding.
inline Tensor conv2d(const Tensor& input, const LayerParams& params, std::size_t stride = 1, std::size_t pad = 0) {
    const ConvGeometry g = ConvGeometry::make(input, params, stride, pad);
    const std::size_t cout = params.out_channels();
    Tensor out({cout, g.out_height, g.out_width});

    std::vector<double> col;
    std::span<const double> cols = input.data();
    if (!detail::is_pointwise(g)) {
        col = detail::im2col(input.data(), g);
        cols = col;
    }
    detail::ConstRowMap w(params.weight.data().data(), static_cast<Eigen::Index>(cout),
                          static_cast<Eigen::Index>(g.patch()));
    detail::ConstRowMap x(cols.data(), static_cast<Eigen::Index>(g.patch()),
                          static_cast<Eigen::Index>(g.positions()));
    detail::RowMap y(out.data().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(g.positions()));
    y.noalias() = w * x;

    if (params.bias) {
        for (std::size_t c = 0; c < cout; ++c) y.row(static_cast<Eigen::Index>(c)).array() += (*params.bias)[c];
    }
    if (params.activation != Activation::none) out = activation_apply(out, params.activation);
    return out;
}

struct ConvGrads {
    Tensor input;
    Tensor weight;
    std::optional<Tensor> bias;
};

// Backward of conv2d given the forward input, the forward output (post
// activation) and the gradient w.r.t. that output.
inline ConvGrads conv2d_backward(const Tensor& input, const LayerParams& params, const Tensor& output,
                                 const Tensor& grad_output, std::size_t stride = 1, std::size_t pad = 0) {
    const ConvGeometry g = ConvGeometry::make(input, params, stride, pad);
    require_same_shape(output, grad_output, "conv2d_backward");
    const std::size_t cout = params.out_channels();
    if (output.shape() != Shape{cout, g.out_height, g.out_width}) {
        throw DimensionError("conv2d_backward: output shape " + shape_string(output.shape()) + " inconsistent");
    }

    Tensor grad_pre = activation_backward(grad_output, output, params.activation);

    std::vector<double> col;
    std::span<const double> cols = input.data();
    if (!detail::is_pointwise(g)) {
        col = detail::im2col(input.data(), g);
        cols = col;
    }
    const auto P = static_cast<Eigen::Index>(g.patch());
    const auto Q = static_cast<Eigen::Index>(g.positions());
    const auto C = static_cast<Eigen::Index>(cout);
    detail::ConstRowMap gp(grad_pre.data().data(), C, Q);
    detail::ConstRowMap x(cols.data(), P, Q);
    detail::ConstRowMap w(params.weight.data().data(), C, P);

    ConvGrads grads{Tensor(input.shape()), Tensor(params.weight.shape()), std::nullopt};
    detail::RowMap gw(grads.weight.data().data(), C, P);
    gw.noalias() = gp * x.transpose();

    if (params.bias) {
        Tensor gb({cout});
        // Plain ordered sum: Eigen's vectorized redux peels by pointer
        // alignment, which would tie results to the allocator.
        const double* row = grad_pre.data().data();
        for (std::size_t c = 0; c < cout; ++c, row += g.positions()) gb[c] = std::accumulate(row, row + g.positions(), 0.0);
        grads.bias = std::move(gb);
    }

    if (detail::is_pointwise(g)) {
        detail::RowMap gx(grads.input.data().data(), P, Q);
        gx.noalias() = w.transpose() * gp;
    } else {
        std::vector<double> gcol(static_cast<std::size_t>(P * Q));
        detail::RowMap gc(gcol.data(), P, Q);
        gc.noalias() = w.transpose() * gp;
        detail::col2im_add(gcol, g, grads.input.data());
    }
    return grads;
}

enum class Resample { down_max, up_nearest };

// 2x spatial resampling of a C x H x W tensor.
inline Tensor resample2x(const Tensor& x, Resample dir) {
    if (x.rank() != 3) throw DimensionError("resample2x expects C x H x W, got " + shape_string(x.shape()));
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (dir == Resample::down_max) {
        if (h % 2 || w % 2) {
            throw DimensionError("down_max needs even spatial extents, got " + std::to_string(h) + "x" +
                                 std::to_string(w));
        }
        Tensor out({c, h / 2, w / 2});
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h / 2; ++y)
                for (std::size_t xx = 0; xx < w / 2; ++xx) {
                    out.at(ch, y, xx) = std::max(std::max(x.at(ch, 2 * y, 2 * xx), x.at(ch, 2 * y, 2 * xx + 1)),
                                                 std::max(x.at(ch, 2 * y + 1, 2 * xx), x.at(ch, 2 * y + 1, 2 * xx + 1)));
                }
        return out;
    }
    Tensor out({c, 2 * h, 2 * w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t xx = 0; xx < 2 * w; ++xx) out.at(ch, y, xx) = x.at(ch, y / 2, xx / 2);
    return out;
}

// Gradient of resample2x w.r.t. its input. For down_max the gradient goes to
// the first maximal element of each window in raster order.
inline Tensor resample2x_backward(const Tensor& input, const Tensor& grad_output, Resample dir) {
    Tensor grad(input.shape());
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (dir == Resample::down_max) {
        if (grad_output.shape() != Shape{c, h / 2, w / 2}) throw DimensionError("down_max backward shape mismatch");
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h / 2; ++y)
                for (std::size_t xx = 0; xx < w / 2; ++xx) {
                    std::size_t by = 2 * y, bx = 2 * xx;
                    double best = input.at(ch, by, bx);
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const double v = input.at(ch, 2 * y + dy, 2 * xx + dx);
                            if (v > best) {
                                best = v;
                                by = 2 * y + dy;
                                bx = 2 * xx + dx;
                            }
                        }
                    grad.at(ch, by, bx) += grad_output.at(ch, y, xx);
                }
        return grad;
    }
    if (grad_output.shape() != Shape{c, 2 * h, 2 * w}) throw DimensionError("up_nearest backward shape mismatch");
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t xx = 0; xx < 2 * w; ++xx) grad.at(ch, y / 2, xx / 2) += grad_output.at(ch, y, xx);
    return grad;
}

// Stacks a and b along the channel axis.
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
        throw DimensionError("concat_channels: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    std::vector<double> data;
    data.reserve(a.size() + b.size());
    data.insert(data.end(), a.data().begin(), a.data().end());
    data.insert(data.end(), b.data().begin(), b.data().end());
    return Tensor({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)}, std::move(data));
}

// Inverse of concat_channels on gradients: first `channels` planes, then the rest.
inline std::pair<Tensor, Tensor> split_channels(const Tensor& x, std::size_t channels) {
    const std::size_t plane = x.dim(1) * x.dim(2);
    const auto mid = x.data().begin() + static_cast<std::ptrdiff_t>(channels * plane);
    return {Tensor({channels, x.dim(1), x.dim(2)}, std::vector<double>(x.data().begin(), mid)),
            Tensor({x.dim(0) - channels, x.dim(1), x.dim(2)}, std::vector<double>(mid, x.data().end()))};
}

// ---------------------------------------------------------------- optimizer

struct AdamHyper {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    std::uint64_t step = 0;
    Tensor first_moment;
    Tensor second_moment;
    AdamHyper hyper;

    static OptimizerState for_params(const Tensor& params, AdamHyper hyper = {}) {
        return {0, Tensor::zeros_like(params), Tensor::zeros_like(params), hyper};
    }
};

// In-place Adam update with bias correction.
inline void adam_update(std::span<double> params, std::span<const double> grads, OptimizerState& state) {
    if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw DimensionError("adam: params " + std::to_string(params.size()) + ", grads " +
                             std::to_string(grads.size()) + ", moments " + std::to_string(state.first_moment.size()));
    }
    const AdamHyper& h = state.hyper;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    auto m = state.first_moment.data();
    auto v = state.second_moment.data();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[i] -= h.lr * mhat / (std::sqrt(vhat) + h.epsilon);
    }
}

inline std::pair<Tensor, OptimizerState> adam_step(const Tensor& params, const Tensor& grads,
                                                   const OptimizerState& state) {
    require_same_shape(params, grads, "adam_step");
    Tensor next = params;
    OptimizerState s = state;
    adam_update(next.data(), grads.data(), s);
    return {std::move(next), std::move(s)};
}

// ---------------------------------------------------------------- gradcheck

struct ValueGrad {
    double value;
    Tensor grad;
};

// Worst componentwise relative error between the analytic gradient returned
// by `fn` and central differences with step eps. `fn` maps a point to its
// scalar value and gradient. `components` restricts the probes (all when
// empty); large parameter tensors are checked on a sample.
template <class Fn>
double gradcheck(Fn&& fn, const Tensor& point, double eps, std::span<const std::size_t> components = {}) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) throw ParameterError("gradcheck eps must lie in [1e-6, 1e-3]");
    const ValueGrad base = fn(point);
    require_same_shape(base.grad, point, "gradcheck analytic gradient");
    std::vector<std::size_t> all;
    if (components.empty()) {
        all.resize(point.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        components = all;
    }
    double worst = 0.0;
    Tensor probe = point;
    for (std::size_t i : components) {
        if (i >= point.size()) throw DimensionError("gradcheck: component " + std::to_string(i) + " out of range");
        const double x0 = point[i];
        probe[i] = x0 + eps;
        const double fp = fn(probe).value;
        probe[i] = x0 - eps;
        const double fm = fn(probe).value;
        probe[i] = x0;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double analytic = base.grad[i];
        if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(analytic)) {
            throw NumericalError("gradcheck: non-finite value while probing component " + std::to_string(i));
        }
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

} // namespace spix

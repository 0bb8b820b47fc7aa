// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "spix/spix.hpp"

namespace spix::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(shape);
    for (double& v : t.data()) v = u(rng);
    return t;
}

inline Image random_image(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(n, n);
    for (double& v : img.pixels) v = u(rng);
    return img;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline std::vector<std::size_t> sample_components(std::size_t size, std::size_t count, std::mt19937_64& rng) {
    std::vector<std::size_t> idx;
    if (size <= count) {
        for (std::size_t i = 0; i < size; ++i) idx.push_back(i);
        return idx;
    }
    std::uniform_int_distribution<std::size_t> u(0, size - 1);
    for (std::size_t i = 0; i < count; ++i) idx.push_back(u(rng));
    return idx;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("spix_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------- gradcheck battery
//
// Each probe is a scalar loss <r, op(x)> with a random weighting r, so every
// output component contributes. Returns the worst relative error over
// `instances` random draws.

inline constexpr double kGradEps = 1e-6;

struct GradcheckResult {
    std::string name;
    double worst = 0.0;
};

inline double gc_conv2d(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    const Activation acts[] = {Activation::none, Activation::relu, Activation::sigmoid};
    for (std::size_t k = 0; k < instances; ++k) {
        const std::size_t cin = 1 + k % 3, cout = 1 + (k + 1) % 3, ks = k % 2 ? 3 : 1 + 2 * (k % 3 == 0);
        const std::size_t stride = 1 + k % 2, pad = k % 3 == 2 ? 1 : 0;
        LayerParams p{random_tensor({cout, cin, ks, ks}, rng), random_tensor({cout}, rng), acts[k % 3]};
        const Tensor x = random_tensor({cin, 6, 6}, rng);
        const Tensor probe = conv2d(x, p, stride, pad);
        const Tensor r = random_tensor(probe.shape(), rng);
        auto loss_at = [&](const Tensor& in, const LayerParams& lp) {
            const Tensor y = conv2d(in, lp, stride, pad);
            return std::pair{dot(r, y), conv2d_backward(in, lp, y, r, stride, pad)};
        };
        worst = std::max(worst, gradcheck([&](const Tensor& in) {
                             auto [v, g] = loss_at(in, p);
                             return ValueGrad{v, g.input};
                         }, x, kGradEps));
        worst = std::max(worst, gradcheck([&](const Tensor& w) {
                             LayerParams q = p;
                             q.weight = w;
                             auto [v, g] = loss_at(x, q);
                             return ValueGrad{v, g.weight};
                         }, p.weight, kGradEps));
        worst = std::max(worst, gradcheck([&](const Tensor& b) {
                             LayerParams q = p;
                             q.bias = b;
                             auto [v, g] = loss_at(x, q);
                             return ValueGrad{v, *g.bias};
                         }, *p.bias, kGradEps));
    }
    return worst;
}

inline double gc_activations(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < instances; ++k) {
        const Tensor x = random_tensor({2, 4, 4}, rng, -3.0, 3.0);
        const Tensor r = random_tensor(x.shape(), rng);
        for (Activation a : {Activation::relu, Activation::sigmoid, Activation::none}) {
            worst = std::max(worst, gradcheck([&](const Tensor& in) {
                                 const Tensor y = activation_apply(in, a);
                                 return ValueGrad{dot(r, y), activation_backward(r, y, a)};
                             }, x, kGradEps));
        }
    }
    return worst;
}

inline double gc_resample(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < instances; ++k) {
        const Tensor x = random_tensor({2, 4, 6}, rng);
        for (Resample d : {Resample::down_max, Resample::up_nearest}) {
            const Tensor r = random_tensor(resample2x(x, d).shape(), rng);
            worst = std::max(worst, gradcheck([&](const Tensor& in) {
                                 return ValueGrad{dot(r, resample2x(in, d)), resample2x_backward(in, r, d)};
                             }, x, kGradEps));
        }
    }
    return worst;
}

inline double gc_concat(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < instances; ++k) {
        const Tensor a = random_tensor({2, 3, 3}, rng), b = random_tensor({1, 3, 3}, rng);
        const Tensor r = random_tensor({3, 3, 3}, rng);
        worst = std::max(worst, gradcheck([&](const Tensor& in) {
                             return ValueGrad{dot(r, concat_channels(in, b)), split_channels(r, 2).first};
                         }, a, kGradEps));
    }
    return worst;
}

inline double gc_expand(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < instances; ++k) {
        ReconParams p = ReconParams::init(8, 5, rng);
        p.expand_bias = random_tensor({64}, rng);
        const Tensor yt = random_tensor({5}, rng, -4.0, 4.0);
        const Tensor r = random_tensor({1, 8, 8}, rng);
        auto run = [&](const ReconParams& q, const Tensor& y) {
            return std::pair{dot(r, expand(y.data(), q)), expand_backward(y.data(), q, r)};
        };
        worst = std::max(worst, gradcheck([&](const Tensor& y) {
                             auto [v, g] = run(p, y);
                             return ValueGrad{v, Tensor({5}, g.readings)};
                         }, yt, kGradEps));
        worst = std::max(worst, gradcheck([&](const Tensor& w) {
                             ReconParams q = p;
                             q.expand_weight = w;
                             auto [v, g] = run(q, yt);
                             return ValueGrad{v, g.weight};
                         }, p.expand_weight, kGradEps));
        worst = std::max(worst, gradcheck([&](const Tensor& b) {
                             ReconParams q = p;
                             q.expand_bias = b;
                             auto [v, g] = run(q, yt);
                             return ValueGrad{v, g.bias};
                         }, p.expand_bias, kGradEps));
    }
    return worst;
}

// ReLU on/off states and max-pool winners of one forward pass. A central
// difference only measures the derivative if these stay put across +-eps.
inline std::vector<std::uint8_t> kink_state(const UNetTape& t) {
    std::vector<std::uint8_t> s;
    for (std::size_t l = 0; l < kHead; ++l)
        for (double v : t.out[l].data()) s.push_back(v > 0.0);
    for (std::size_t l : {kEnc1, kEnc2, kEnc3}) {
        const Tensor& x = t.out[l];
        for (std::size_t c = 0; c < x.dim(0); ++c)
            for (std::size_t y = 0; y + 1 < x.dim(1); y += 2)
                for (std::size_t z = 0; z + 1 < x.dim(2); z += 2) {
                    const double v[4] = {x.at(c, y, z), x.at(c, y, z + 1), x.at(c, y + 1, z), x.at(c, y + 1, z + 1)};
                    s.push_back(static_cast<std::uint8_t>(std::max_element(v, v + 4) - v));
                }
    }
    return s;
}

// One probed component and the step it is differenced with.
struct Probe {
    std::size_t index;
    double eps;
};

// Random components that meet the gradcheck precondition: each gets the
// largest step from the ladder whose +-eps moves leave kink_state unchanged.
// Components with no such step are skipped. state_at(i, delta) returns the
// state with component i moved by delta.
template <class StateAt>
std::vector<Probe> smooth_probes(std::size_t size, std::size_t count, std::mt19937_64& rng, StateAt&& state_at) {
    constexpr double kLadder[] = {1e-4, 1e-5, 1e-6};
    const auto base = state_at(0, 0.0);
    std::vector<Probe> probes;
    std::uniform_int_distribution<std::size_t> u(0, size - 1);
    for (std::size_t tries = 0; probes.size() < count && tries < 20 * count; ++tries) {
        const std::size_t i = u(rng);
        for (double eps : kLadder) {
            if (state_at(i, eps) == base && state_at(i, -eps) == base) {
                probes.push_back({i, eps});
                break;
            }
        }
    }
    // An empty list would make gradcheck probe everything, kinks included.
    if (probes.size() < count) throw std::runtime_error("smooth_probes: too few components away from a kink");
    return probes;
}

template <class Fn>
double gradcheck_probes(Fn&& fn, const Tensor& point, const std::vector<Probe>& probes) {
    double worst = 0.0;
    std::vector<double> steps;
    for (const Probe& p : probes)
        if (std::find(steps.begin(), steps.end(), p.eps) == steps.end()) steps.push_back(p.eps);
    for (double eps : steps) {
        std::vector<std::size_t> idx;
        for (const Probe& p : probes)
            if (p.eps == eps) idx.push_back(p.index);
        worst = std::max(worst, gradcheck(fn, point, eps, idx));
    }
    return worst;
}

// Random biases keep ReLU units away from the all-dead corner.
inline ReconParams random_recon(std::size_t side, std::size_t m, std::mt19937_64& rng) {
    ReconParams p = ReconParams::init(side, m, rng);
    std::uniform_real_distribution<double> u(0.0, 0.1);
    for (auto& l : p.unet)
        for (double& v : l.bias->data()) v = u(rng);
    return p;
}

inline double gc_unet(std::size_t instances, std::uint64_t seed, std::size_t per_tensor = 12) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < instances; ++k) {
        const ReconParams p = random_recon(16, 4, rng);
        const Tensor map = random_tensor({1, 16, 16}, rng);
        const Tensor r = random_tensor({1, 16, 16}, rng);
        auto run = [&](const Tensor& in, const ReconParams& q) {
            const UNetTape t = unet_forward_tape(in, q);
            return std::pair{dot(r, t.out[kHead]), unet_backward(t, q, r)};
        };
        auto moved = [](Tensor t, std::size_t i, double d) {
            t[i] += d;
            return t;
        };
        const auto in_idx = smooth_probes(map.size(), per_tensor * 2, rng, [&](std::size_t i, double d) {
            return kink_state(unet_forward_tape(moved(map, i, d), p));
        });
        worst = std::max(worst, gradcheck_probes([&](const Tensor& in) {
                             auto [v, g] = run(in, p);
                             return ValueGrad{v, g.input};
                         }, map, in_idx));
        for (std::size_t l = 0; l < kUNetLayers; ++l) {
            const auto w_idx = smooth_probes(p.unet[l].weight.size(), per_tensor, rng, [&](std::size_t i, double d) {
                ReconParams q = p;
                q.unet[l].weight[i] += d;
                return kink_state(unet_forward_tape(map, q));
            });
            worst = std::max(worst, gradcheck_probes([&](const Tensor& w) {
                                 ReconParams q = p;
                                 q.unet[l].weight = w;
                                 auto [v, g] = run(map, q);
                                 return ValueGrad{v, g.layers[l].weight};
                             }, p.unet[l].weight, w_idx));
            const auto b_idx = smooth_probes(p.unet[l].bias->size(), per_tensor, rng, [&](std::size_t i, double d) {
                ReconParams q = p;
                (*q.unet[l].bias)[i] += d;
                return kink_state(unet_forward_tape(map, q));
            });
            worst = std::max(worst, gradcheck_probes([&](const Tensor& b) {
                                 ReconParams q = p;
                                 q.unet[l].bias = b;
                                 auto [v, g] = run(map, q);
                                 return ValueGrad{v, g.layers[l].bias};
                             }, *p.unet[l].bias, b_idx));
        }
    }
    return worst;
}

// The composed train-time loss mse(label, R(Phi f)) with Phi treated as a
// real matrix: checks the pattern gradient the straight-through rule starts
// from, plus the expansion weights.
inline double gc_composed_loss(std::size_t instances, std::uint64_t seed, std::size_t per_tensor = 16) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    GenConfig cfg;
    cfg.count = 10;
    cfg.canvas = 32;
    for (std::size_t k = 0; k < instances; ++k) {
        cfg.seed = seed + k;
        const LabeledPair pair = generate_pairs(cfg)[k % 10];
        const Sample s{pair.scene, pair.label, pair.distractor_mask};
        Model model = Model::init(32, 20, seed + 100 + k);
        model.recon = random_recon(32, 20, rng);
        const PatternStack patterns = binarize(model.latent);
        const Tensor phi = patterns.as_latent().values;

        auto readings = [&](const Tensor& real_phi) {
            std::vector<double> y(20, 0.0);
            for (std::size_t m = 0; m < 20; ++m)
                for (std::size_t p = 0; p < 1024; ++p) y[m] += real_phi[m * 1024 + p] * s.scene.pixels[p];
            return y;
        };
        auto loss_with = [&](const Tensor& real_phi, const ReconParams& q) {
            return loss_mse(s.label, reconstruct(q, readings(real_phi)));
        };
        auto state_with = [&](const Tensor& real_phi, const ReconParams& q) {
            return kink_state(unet_forward_tape(expand(readings(real_phi), q), q));
        };
        ModelGrads g = ModelGrads::zeros(model);
        accumulate_sample_grads(model, patterns, s, 1.0, g);

        const auto phi_idx = smooth_probes(phi.size(), per_tensor, rng, [&](std::size_t i, double d) {
            Tensor x = phi;
            x[i] += d;
            return state_with(x, model.recon);
        });
        worst = std::max(worst, gradcheck_probes([&](const Tensor& x) {
                             return ValueGrad{loss_with(x, model.recon), g.patterns};
                         }, phi, phi_idx));
        const auto w_idx = smooth_probes(model.recon.expand_weight.size(), per_tensor, rng, [&](std::size_t i, double d) {
            ReconParams q = model.recon;
            q.expand_weight[i] += d;
            return state_with(phi, q);
        });
        worst = std::max(worst, gradcheck_probes([&](const Tensor& w) {
                             ReconParams q = model.recon;
                             q.expand_weight = w;
                             return ValueGrad{loss_with(phi, q), g.expand_weight};
                         }, model.recon.expand_weight, w_idx));
        const auto h_idx = smooth_probes(model.recon.unet[kEnc2].weight.size(), per_tensor, rng, [&](std::size_t i, double d) {
            ReconParams q = model.recon;
            q.unet[kEnc2].weight[i] += d;
            return state_with(phi, q);
        });
        worst = std::max(worst, gradcheck_probes([&](const Tensor& w) {
                             ReconParams q = model.recon;
                             q.unet[kEnc2].weight = w;
                             return ValueGrad{loss_with(phi, q), g.unet[kEnc2].weight};
                         }, model.recon.unet[kEnc2].weight, h_idx));
    }
    return worst;
}

inline double gc_loss_mse(std::size_t instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < instances; ++k) {
        const Image label = random_image(8, rng);
        const Tensor pred = random_image(8, rng).to_tensor();
        worst = std::max(worst, gradcheck([&](const Tensor& x) {
                             const Image p = Image::from_tensor(x);
                             return ValueGrad{loss_mse(label, p), loss_mse_grad(label, p)};
                         }, pred, kGradEps));
    }
    return worst;
}

inline std::vector<GradcheckResult> gradcheck_battery(std::size_t instances, std::uint64_t seed) {
    return {{"conv2d", gc_conv2d(instances, seed)},
            {"activations", gc_activations(instances, seed + 1)},
            {"resample2x", gc_resample(instances, seed + 2)},
            {"concat_channels", gc_concat(instances, seed + 3)},
            {"expand", gc_expand(instances, seed + 4)},
            {"unet_forward", gc_unet(instances, seed + 5)},
            {"loss_mse", gc_loss_mse(instances, seed + 6)},
            {"composed train loss", gc_composed_loss(instances, seed + 7)}};
}

} // namespace spix::testing

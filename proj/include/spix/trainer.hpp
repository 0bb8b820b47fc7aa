// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Joint end-to-end optimization of the sampling patterns and the
// reconstruction network against target-only labels.
//
// Randomness: parameters are initialized from mt19937_64(derive_seed(seed, 1))
// (latent weights first, then the reconstructor in layer order); the sample
// order of epoch e is a Fisher-Yates shuffle driven by
// mt19937_64(derive_seed(seed, 1000 + e)). Nothing else draws random numbers,
// so a run resumed from an epoch-k checkpoint replays epoch k+1 exactly.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "spix/binio.hpp"
#include "spix/error.hpp"
#include "spix/image.hpp"
#include "spix/kernels.hpp"
#include "spix/metrics.hpp"
#include "spix/reconstructor.hpp"
#include "spix/sampler.hpp"
#include "spix/scene.hpp"

namespace spix {

// ---------------------------------------------------------------- data

struct Sample {
    Image scene;
    Image label;
    Image distractors; // empty image when the dataset carries no masks
};

struct Dataset {
    std::size_t side = 0;
    std::vector<Sample> samples;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::uint64_t manifest_hash = 0;

    // In-memory dataset with the generator's split (last 10% validation).
    static Dataset from_pairs(const std::vector<LabeledPair>& pairs) {
        if (pairs.empty()) throw ParameterError("dataset is empty");
        Dataset d;
        d.side = pairs.front().scene.height;
        const std::size_t first_val = pairs.size() - validation_count(pairs.size());
        std::string fingerprint;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            d.samples.push_back({pairs[i].scene, pairs[i].label, pairs[i].distractor_mask});
            (i >= first_val ? d.validation : d.train).push_back(i);
            for (double v : pairs[i].scene.pixels) fingerprint.push_back(static_cast<char>(quantize8(v)));
        }
        d.manifest_hash = binio::fnv1a(fingerprint);
        return d;
    }
};

enum class Split { train, validation };

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "validation" || s == "val") return Split::validation;
    throw ParameterError("unknown split '" + s + "'");
}

inline const std::vector<std::size_t>& split_indices(const Dataset& d, Split s) {
    return s == Split::train ? d.train : d.validation;
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    std::ifstream is(manifest_path, std::ios::binary);
    if (!is) throw IoError(manifest_path.string(), "cannot open manifest");
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    const DatasetManifest m = parse_manifest(text, manifest_path.parent_path());
    Dataset d;
    d.side = m.canvas;
    d.manifest_hash = binio::fnv1a(text);
    const bool masks = m.header("masks") == "distractors";
    for (const auto& r : m.records) {
        if (r.index != d.samples.size()) {
            throw ValidationError("manifest records must be listed in index order; found " + std::to_string(r.index) +
                                  " at position " + std::to_string(d.samples.size()));
        }
        Sample s{read_pgm((m.base_dir / r.scene_path).string()), read_pgm((m.base_dir / r.label_path).string()), {}};
        if (masks) s.distractors = read_pgm((m.base_dir / mask_path_for(r.label_path)).string());
        if (s.scene.height != m.canvas || !s.scene.square() || s.label.height != m.canvas || !s.label.square()) {
            throw DimensionError("sample " + std::to_string(r.index) + " does not match canvas " + std::to_string(m.canvas));
        }
        d.samples.push_back(std::move(s));
        (r.validation ? d.validation : d.train).push_back(r.index);
    }
    return d;
}

// ---------------------------------------------------------------- model

// Sampling weights plus reconstructor: the full S∘R pipeline.
struct Model {
    LatentWeights latent;
    ReconParams recon;

    std::size_t side() const { return recon.side; }
    std::size_t measurements() const { return recon.measurements; }

    static Model init(std::size_t side, std::size_t measurements, std::uint64_t seed) {
        std::mt19937_64 rng(derive_seed(seed, 1));
        Model m;
        m.latent = LatentWeights::uniform(measurements, side, 0.1, rng);
        m.recon = ReconParams::init(side, measurements, rng);
        return m;
    }

    // Named views over every trainable array, in a fixed order.
    std::vector<std::pair<std::string, Tensor*>> parameters() { return parameters_of(*this); }
    std::vector<std::pair<std::string, const Tensor*>> parameters() const { return parameters_of(*this); }

private:
    template <class Self, class Ptr = std::conditional_t<std::is_const_v<Self>, const Tensor*, Tensor*>>
    static std::vector<std::pair<std::string, Ptr>> parameters_of(Self& self) {
        std::vector<std::pair<std::string, Ptr>> p{{"latent", &self.latent.values},
                                                   {"expand.weight", &self.recon.expand_weight},
                                                   {"expand.bias", &self.recon.expand_bias}};
        for (std::size_t l = 0; l < kUNetLayers; ++l) {
            p.emplace_back(std::string(kUNetLayerNames[l]) + ".weight", &self.recon.unet[l].weight);
            p.emplace_back(std::string(kUNetLayerNames[l]) + ".bias", &*self.recon.unet[l].bias);
        }
        return p;
    }
};

// Deployment path: map measurements to the target-only image.
inline Image reconstruct(const ReconParams& recon, std::span<const double> readings) {
    return unet_forward(expand(readings, recon), recon);
}

// binarize -> measure -> expand -> U-net.
inline Image predict(const PatternStack& patterns, const ReconParams& recon, const Image& scene) {
    return reconstruct(recon, measure(patterns, scene));
}

inline Image predict(const Model& model, const Image& scene) {
    return predict(binarize(model.latent), model.recon, scene);
}

// ---------------------------------------------------------------- loss

inline double loss_mse(const Image& label, const Image& prediction) { return mse(label, prediction); }

// d loss_mse / d prediction.
inline Tensor loss_mse_grad(const Image& label, const Image& prediction) {
    require_same_shape(label, prediction, "loss_mse_grad");
    Tensor g({1, prediction.height, prediction.width});
    const double scale = 2.0 / static_cast<double>(label.size());
    for (std::size_t i = 0; i < label.size(); ++i) g[i] = scale * (prediction.pixels[i] - label.pixels[i]);
    return g;
}

// ---------------------------------------------------------------- config

enum class LossKind { mse };

struct TrainConfig {
    double rate = 0.1;
    std::size_t epochs = 30;
    std::size_t batch = 16;
    double lr = 2e-4;
    std::uint64_t seed = 1;
    LossKind loss = LossKind::mse;
    std::size_t checkpoint_every = 0; // epochs; 0 disables intermediate checkpoints
    std::string checkpoint_dir;

    void validate() const {
        if (!(rate > 0.0 && rate <= 1.0)) throw ParameterError("rate must lie in (0, 1]");
        if (epochs < 1) throw ParameterError("epochs must be >= 1");
        if (batch < 1) throw ParameterError("batch must be >= 1");
        if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
    }
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct EpochRecord {
    std::size_t epoch = 0; // 1-based count of completed epochs
    double train_loss = 0, val_loss = 0, val_psnr = 0, val_ssim = 0;
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> records;

    std::string csv() const {
        std::ostringstream os;
        os << "epoch,train_loss,val_loss,val_psnr,val_ssim\n";
        for (const auto& r : records) {
            os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
               << format_double(r.val_psnr) << ',' << format_double(r.val_ssim) << '\n';
        }
        return os.str();
    }
    friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct ModelCheckpoint {
    Model model;
    std::vector<OptimizerState> optim; // parallel to Model::parameters()
    TrainConfig config;
    std::size_t epoch = 0;
    std::uint64_t manifest_hash = 0;
};

// ---------------------------------------------------------------- evaluation

struct EvalRow {
    std::size_t index = 0;
    double psnr = 0, ssim = 0, loss = 0;
    double selectivity = -1; // -1 when the sample has no visible distractor
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_psnr = 0, mean_ssim = 0, mean_loss = 0;
    double mean_selectivity = 0; // over rows that have distractors

    std::string csv() const {
        std::ostringstream os;
        os << "index,psnr,ssim,loss,selectivity\n";
        for (const auto& r : rows) {
            os << r.index << ',' << format_double(r.psnr) << ',' << format_double(r.ssim) << ','
               << format_double(r.loss) << ',' << format_double(r.selectivity) << '\n';
        }
        return os.str();
    }
};

// Scores `predictor(sample) -> Image` on the given sample indices.
template <class Predictor>
EvalReport evaluate_with(Predictor&& predictor, const Dataset& data, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ParameterError("evaluate: split is empty");
    EvalReport rep;
    std::size_t with_distractors = 0;
    for (std::size_t i : indices) {
        const Sample& s = data.samples.at(i);
        const Image pred = predictor(s);
        require_same_shape(pred, s.label, "evaluate");
        EvalRow row{i, psnr(pred, s.label), ssim(pred, s.label), loss_mse(s.label, pred), -1.0};
        if (!s.distractors.pixels.empty() &&
            std::any_of(s.distractors.pixels.begin(), s.distractors.pixels.end(), [](double v) { return v != 0.0; })) {
            row.selectivity = selectivity(pred, s.label, s.distractors);
            rep.mean_selectivity += row.selectivity;
            ++with_distractors;
        }
        rep.mean_psnr += row.psnr;
        rep.mean_ssim += row.ssim;
        rep.mean_loss += row.loss;
        rep.rows.push_back(row);
    }
    const auto n = static_cast<double>(rep.rows.size());
    rep.mean_psnr /= n;
    rep.mean_ssim /= n;
    rep.mean_loss /= n;
    if (with_distractors) rep.mean_selectivity /= static_cast<double>(with_distractors);
    return rep;
}

inline EvalReport evaluate(const ModelCheckpoint& ckpt, const Dataset& data, Split split) {
    if (ckpt.model.side() != data.side) {
        throw DimensionError("evaluate: checkpoint side " + std::to_string(ckpt.model.side()) +
                             " vs dataset canvas " + std::to_string(data.side));
    }
    const PatternStack patterns = binarize(ckpt.model.latent);
    return evaluate_with([&](const Sample& s) { return predict(patterns, ckpt.model.recon, s.scene); }, data,
                         split_indices(data, split));
}

// ---------------------------------------------------------------- gradients

struct ModelGrads {
    Tensor patterns; // d loss / d binary pattern entries, {M, N*N}
    Tensor expand_weight, expand_bias;
    std::vector<LayerGrads> unet;

    static ModelGrads zeros(const Model& m) {
        ModelGrads g{Tensor({m.measurements(), m.side() * m.side()}), Tensor::zeros_like(m.recon.expand_weight),
                     Tensor::zeros_like(m.recon.expand_bias), {}};
        for (const auto& l : m.recon.unet) g.unet.push_back({Tensor::zeros_like(l.weight), Tensor::zeros_like(*l.bias)});
        return g;
    }
};

struct ForwardResult {
    Image prediction;
    double loss = 0;
};

// One sample's forward and backward pass; accumulates scale * gradients into `acc`.
inline ForwardResult accumulate_sample_grads(const Model& model, const PatternStack& patterns, const Sample& s,
                                             double scale, ModelGrads& acc) {
    const std::vector<double> y = measure(patterns, s.scene);
    const Tensor map = expand(y, model.recon);
    const UNetTape tape = unet_forward_tape(map, model.recon);
    ForwardResult r{Image::from_tensor(tape.out[kHead]), 0.0};
    r.loss = loss_mse(s.label, r.prediction);

    Tensor g_out = loss_mse_grad(s.label, r.prediction);
    for (double& v : g_out.data()) v *= scale;
    UNetGrads ug = unet_backward(tape, model.recon, g_out);
    for (std::size_t l = 0; l < kUNetLayers; ++l) {
        axpy(acc.unet[l].weight, ug.layers[l].weight);
        axpy(acc.unet[l].bias, ug.layers[l].bias);
    }
    ExpandGrads eg = expand_backward(y, model.recon, ug.input);
    axpy(acc.expand_weight, eg.weight);
    axpy(acc.expand_bias, eg.bias);

    // y_m = sum_p Phi_mp f_p  =>  dL/dPhi_mp = dL/dy_m * f_p
    const std::size_t n = model.side() * model.side();
    auto gp = acc.patterns.data();
    for (std::size_t m = 0; m < y.size(); ++m) {
        const double gy = eg.readings[m];
        double* row = gp.data() + m * n;
        for (std::size_t p = 0; p < n; ++p) row[p] += gy * s.scene.pixels[p];
    }
    return r;
}

// ---------------------------------------------------------------- training

namespace detail {

inline std::vector<std::size_t> epoch_order(const std::vector<std::size_t>& train, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order = train;
    std::mt19937_64 rng(derive_seed(seed, 1000 + epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

inline std::vector<OptimizerState> fresh_optimizers(Model& model, double lr) {
    std::vector<OptimizerState> s;
    for (auto& [name, t] : model.parameters()) s.push_back(OptimizerState::for_params(*t, AdamHyper{lr}));
    return s;
}

} // namespace detail

struct TrainResult {
    ModelCheckpoint checkpoint;
    TrainHistory history;
};

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);

// One Adam update of every parameter from gradients averaged over `batch`.
// Returns the mean pre-update loss of the batch.
inline double train_step(ModelCheckpoint& ckpt, const Dataset& data, std::span<const std::size_t> batch) {
    Model& model = ckpt.model;
    const PatternStack patterns = binarize(model.latent);
    ModelGrads g = ModelGrads::zeros(model);
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (std::size_t i : batch) loss += accumulate_sample_grads(model, patterns, data.samples.at(i), scale, g).loss;
    loss *= scale;

    const Tensor latent_grad = ste_grad(g.patterns, model.latent);
    std::vector<const Tensor*> grads{&latent_grad, &g.expand_weight, &g.expand_bias};
    for (const auto& lg : g.unet) {
        grads.push_back(&lg.weight);
        grads.push_back(&lg.bias);
    }
    auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) adam_update(params[k].second->data(), grads[k]->data(), ckpt.optim[k]);
    model.latent.clamp_unit();
    return loss;
}

inline TrainResult train(const Dataset& data, const TrainConfig& config, const ModelCheckpoint* resume = nullptr,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    config.validate();
    if (data.side == 0 || data.side % 8) throw DimensionError("train: canvas must be divisible by 8");
    if (data.train.empty() || data.validation.empty()) throw ParameterError("train: both splits must be non-empty");

    TrainResult res;
    ModelCheckpoint& ck = res.checkpoint;
    if (resume) {
        if (resume->manifest_hash != data.manifest_hash) throw ValidationError("resume: checkpoint was trained on different data");
        if (resume->model.side() != data.side) throw DimensionError("resume: checkpoint side differs from dataset canvas");
        ck = *resume;
        ck.config = config;
        for (auto& s : ck.optim) s.hyper.lr = config.lr;
    } else {
        ck.model = Model::init(data.side, measurement_count(config.rate, data.side), config.seed);
        ck.optim = detail::fresh_optimizers(ck.model, config.lr);
        ck.config = config;
        ck.epoch = 0;
        ck.manifest_hash = data.manifest_hash;
    }

    for (std::size_t e = ck.epoch; e < config.epochs; ++e) {
        const auto order = detail::epoch_order(data.train, config.seed, e);
        double loss_sum = 0.0;
        for (std::size_t b = 0; b * config.batch < order.size(); ++b) {
            const std::size_t begin = b * config.batch;
            const std::size_t end = std::min(order.size(), begin + config.batch);
            const double loss = train_step(ck, data, std::span(order).subspan(begin, end - begin));
            if (!std::isfinite(loss)) {
                throw NumericalError("non-finite loss at epoch " + std::to_string(e + 1) + ", batch " + std::to_string(b + 1));
            }
            loss_sum += loss * static_cast<double>(end - begin);
        }
        ck.epoch = e + 1;

        const EvalReport val = evaluate(ck, data, Split::validation);
        EpochRecord rec{e + 1, loss_sum / static_cast<double>(order.size()), val.mean_loss, val.mean_psnr, val.mean_ssim};
        res.history.records.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (config.checkpoint_every && !config.checkpoint_dir.empty() && ck.epoch % config.checkpoint_every == 0) {
            char name[48];
            std::snprintf(name, sizeof name, "checkpoint_epoch%04zu.spck", ck.epoch);
            save_checkpoint((std::filesystem::path(config.checkpoint_dir) / name).string(), ck);
        }
    }
    return res;
}

// ---------------------------------------------------------------- SPCK files
//
// "SPCK" | u32 version | u64 manifest length | manifest text | payload.
// The manifest is key=value lines followed by one line per array:
//   array <name> f64 <d0>x<d1>... <byte offset into payload> <element count>
// The payload is the arrays' little-endian doubles back to back.

inline constexpr std::uint32_t kSpckVersion = 1;

inline std::vector<char> encode_checkpoint(const ModelCheckpoint& ckpt) {
    const Model& model = ckpt.model;
    const auto params = model.parameters();
    if (ckpt.optim.size() != params.size()) throw DimensionError("checkpoint: optimizer state count mismatch");

    std::vector<std::pair<std::string, const Tensor*>> arrays;
    for (const auto& [name, t] : params) arrays.emplace_back(name, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        arrays.emplace_back("adam.m." + params[k].first, &ckpt.optim[k].first_moment);
        arrays.emplace_back("adam.v." + params[k].first, &ckpt.optim[k].second_moment);
    }

    const TrainConfig& c = ckpt.config;
    const AdamHyper h = ckpt.optim.front().hyper;
    std::ostringstream text;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ckpt.manifest_hash));
    text << "epoch=" << ckpt.epoch << "\nmanifest_hash=" << hash << "\nside=" << model.side()
         << "\nmeasurements=" << model.measurements() << "\nadam.step=" << ckpt.optim.front().step
         << "\nadam.lr=" << format_double(h.lr) << "\nadam.beta1=" << format_double(h.beta1)
         << "\nadam.beta2=" << format_double(h.beta2) << "\nadam.epsilon=" << format_double(h.epsilon)
         << "\nconfig.rate=" << format_double(c.rate) << "\nconfig.epochs=" << c.epochs << "\nconfig.batch=" << c.batch
         << "\nconfig.lr=" << format_double(c.lr) << "\nconfig.seed=" << c.seed << "\nconfig.loss=mse"
         << "\nconfig.checkpoint_every=" << c.checkpoint_every << '\n';
    std::uint64_t offset = 0;
    for (const auto& [name, t] : arrays) {
        text << "array " << name << " f64 " << shape_string(t->shape()) << ' ' << offset << ' ' << t->size() << '\n';
        offset += 8 * t->size();
    }

    binio::Writer w;
    w.bytes("SPCK");
    w.u32(kSpckVersion);
    const std::string manifest = text.str();
    w.u64(manifest.size());
    w.bytes(manifest);
    for (const auto& [name, t] : arrays)
        for (double v : t->data()) w.f64(v);
    return w.buffer();
}

inline void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
    binio::Writer w;
    const auto bytes = encode_checkpoint(ckpt);
    w.bytes(std::string_view(bytes.data(), bytes.size()));
    w.save(path);
}

inline ModelCheckpoint decode_checkpoint(binio::Reader& r) {
    r.expect_magic("SPCK");
    const std::uint64_t version_at = r.offset();
    if (r.u32("version") != kSpckVersion) throw FormatError(version_at, "unsupported SPCK version");
    const std::uint64_t text_len = r.u64("manifest length");
    const std::uint64_t text_at = r.offset();
    if (text_len > r.remaining()) throw FormatError(text_at, "manifest length exceeds file size");
    const std::string text = r.bytes(text_len, "manifest");
    const std::uint64_t payload_at = r.offset();

    std::map<std::string, std::string> kv;
    struct ArrayEntry { Shape shape; std::uint64_t offset, count; };
    std::map<std::string, ArrayEntry> arrays;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("array ", 0) == 0) {
            std::istringstream ls(line.substr(6));
            std::string name, dtype, shape_s;
            ArrayEntry e{};
            if (!(ls >> name >> dtype >> shape_s >> e.offset >> e.count) || dtype != "f64") {
                throw FormatError(text_at, "malformed array line: " + line);
            }
            std::istringstream ss(shape_s);
            for (std::string part; std::getline(ss, part, 'x');) e.shape.push_back(std::stoul(part));
            if (shape_product(e.shape) != e.count) throw FormatError(text_at, "array shape/count mismatch: " + name);
            arrays[name] = e;
        } else if (auto eq = line.find('='); eq != std::string::npos) {
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        } else if (!line.empty()) {
            throw FormatError(text_at, "malformed manifest line: " + line);
        }
    }
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError(text_at, "checkpoint manifest lacks '" + k + "'");
        return it->second;
    };

    const std::size_t side = std::stoul(need("side"));
    const std::size_t measurements = std::stoul(need("measurements"));
    ModelCheckpoint ck;
    ck.epoch = std::stoul(need("epoch"));
    ck.manifest_hash = std::stoull(need("manifest_hash"), nullptr, 16);
    ck.config.rate = std::stod(need("config.rate"));
    ck.config.epochs = std::stoul(need("config.epochs"));
    ck.config.batch = std::stoul(need("config.batch"));
    ck.config.lr = std::stod(need("config.lr"));
    ck.config.seed = std::stoull(need("config.seed"));
    ck.config.checkpoint_every = std::stoul(need("config.checkpoint_every"));
    AdamHyper h{std::stod(need("adam.lr")), std::stod(need("adam.beta1")), std::stod(need("adam.beta2")),
                std::stod(need("adam.epsilon"))};
    const std::uint64_t step = std::stoull(need("adam.step"));

    ck.model.latent = LatentWeights(measurements, side, Tensor({measurements, side * side}));
    ck.model.recon = ReconParams::zeros(side, measurements);

    const std::uint64_t payload_len = r.remaining();
    auto load = [&](const std::string& name, Tensor& into) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw FormatError(text_at, "checkpoint lacks array '" + name + "'");
        const ArrayEntry& e = it->second;
        if (e.shape != into.shape()) throw FormatError(text_at, "array '" + name + "' has shape " + shape_string(e.shape));
        if (e.offset + 8 * e.count > payload_len) throw FormatError(payload_at + e.offset, "array '" + name + "' truncated");
        for (std::uint64_t i = 0; i < e.count; ++i) into[i] = r.f64_at(payload_at + e.offset + 8 * i);
    };
    auto params = ck.model.parameters();
    for (auto& [name, t] : params) {
        load(name, *t);
        OptimizerState s = OptimizerState::for_params(*t, h);
        s.step = step;
        load("adam.m." + name, s.first_moment);
        load("adam.v." + name, s.second_moment);
        ck.optim.push_back(std::move(s));
    }
    std::uint64_t expected = 0;
    for (const auto& [name, e] : arrays) expected = std::max(expected, e.offset + 8 * e.count);
    if (expected != payload_len) throw FormatError(payload_at + std::min(expected, payload_len), "payload length mismatch");
    ck.model.recon.validate();
    return ck;
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
    auto r = binio::Reader::load(path);
    return decode_checkpoint(r);
}

} // namespace spix

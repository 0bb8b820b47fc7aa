// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Command-line front end. Every subcommand reads a flat key=value config
// (--config FILE, '#' comments) overlaid by --key value flags, rejects keys
// it does not know before touching the filesystem, and writes only under
// --out, where it also leaves the resolved config as resolved.cfg.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error (including
// out-of-range settings).

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spix/spix.hpp"

namespace fs = std::filesystem;
using namespace spix;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Kind { text, integer, real, flag, path };

struct KeySpec {
    std::string name;
    Kind kind;
    std::string fallback; // empty + required -> must be supplied
    std::string help;
    bool required = false;
};

// Resolved key=value settings of one invocation.
class RunConfig {
public:
    RunConfig(std::string command, const std::vector<KeySpec>& keys) : command_(std::move(command)), keys_(keys) {
        for (const auto& k : keys_) values_[k.name] = k.fallback;
    }

    void merge_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw UsageError("cannot read config file '" + path + "'");
        std::string line;
        for (std::size_t no = 1; std::getline(is, line); ++no) {
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(no) + ": expected key=value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), path + ":" + std::to_string(no));
        }
    }

    void set(const std::string& key, const std::string& value, const std::string& where) {
        if (!values_.count(key)) throw UsageError(where + ": unknown key '" + key + "' for " + command_);
        values_[key] = value;
    }

    // Type-checks every value and enforces required keys.
    void check() const {
        for (const auto& k : keys_) {
            const std::string& v = values_.at(k.name);
            if (v.empty()) {
                if (k.required) throw UsageError("missing required key '" + k.name + "' for " + command_);
                continue;
            }
            try {
                std::size_t used = 0;
                switch (k.kind) {
                    case Kind::integer:
                        if (v.front() == '-') throw std::invalid_argument("negative");
                        std::stoull(v, &used);
                        break;
                    case Kind::real: std::stod(v, &used); break;
                    case Kind::flag: used = (v == "0" || v == "1" || v == "true" || v == "false") ? v.size() : 0; break;
                    default: used = v.size();
                }
                if (used != v.size()) throw std::invalid_argument("trailing text");
            } catch (const std::exception&) {
                throw UsageError("key '" + k.name + "' has malformed value '" + v + "'");
            }
        }
    }

    const std::string& text(const std::string& key) const { return values_.at(key); }
    bool has(const std::string& key) const { return !values_.at(key).empty(); }
    std::uint64_t integer(const std::string& key) const { return std::stoull(values_.at(key)); }
    std::size_t size(const std::string& key) const { return static_cast<std::size_t>(integer(key)); }
    double real(const std::string& key) const { return std::stod(values_.at(key)); }
    bool flag(const std::string& key) const { return text(key) == "1" || text(key) == "true"; }

    std::vector<double> reals(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(text(key));
        for (std::string tok; std::getline(ss, tok, ',');) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(trim(tok), &used));
                if (used != trim(tok).size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw UsageError("key '" + key + "' expects a comma-separated list of numbers");
            }
        }
        return out;
    }

    std::string resolved() const {
        std::ostringstream os;
        os << "# spix " << command_ << "\n";
        for (const auto& k : keys_) os << k.name << '=' << values_.at(k.name) << '\n';
        return os.str();
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    }

    std::string command_;
    std::vector<KeySpec> keys_;
    std::map<std::string, std::string> values_;
};

void log(const std::string& msg) {
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%H:%M:%S", std::localtime(&now));
    std::cerr << '[' << stamp << "] " << msg << std::endl;
}

fs::path prepare_out(const RunConfig& cfg) {
    const fs::path out = cfg.text("out");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw IoError(out.string(), "cannot create output directory");
    std::ofstream(out / "resolved.cfg", std::ios::binary) << cfg.resolved();
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) throw IoError(path.string(), "write failed");
}

fs::path manifest_path(const std::string& data) {
    const fs::path p = data;
    return fs::is_directory(p) ? p / "manifest.txt" : p;
}

void write_previews(const fs::path& dir, const Dataset& data, const std::vector<std::size_t>& indices, std::size_t count,
                    const std::function<Image(const Sample&)>& predict_fn) {
    for (std::size_t k = 0; k < std::min(count, indices.size()); ++k) {
        const Sample& s = data.samples[indices[k]];
        char name[40];
        std::snprintf(name, sizeof name, "preview_%05zu.pgm", indices[k]);
        write_pgm((dir / name).string(), hconcat({s.scene, s.label, predict_fn(s)}));
    }
}

std::string fmt(double v) { return format_double(v); }

// ---------------------------------------------------------------- subcommands

const KeySpec kOut{"out", Kind::path, "", "output directory", true};

int cmd_gen_data(const RunConfig& cfg) {
    GenConfig g;
    g.count = cfg.size("count");
    g.canvas = cfg.size("canvas");
    g.seed = cfg.integer("seed");
    g.target = parse_target_kind(cfg.text("target"));
    g.petals = static_cast<int>(cfg.integer("petals"));
    g.radius_frac = cfg.real("radius_frac");
    g.shift_max = static_cast<int>(cfg.integer("shift_max"));
    g.rotation_deg = cfg.real("rotation_deg");
    g.intensity_min = cfg.real("intensity_min");
    g.intensity_max = cfg.real("intensity_max");
    g.distractors_min = static_cast<int>(cfg.integer("distractors_min"));
    g.distractors_max = static_cast<int>(cfg.integer("distractors_max"));
    g.use_square = cfg.flag("use_square");
    g.use_triangle = cfg.flag("use_triangle");
    g.use_ring = cfg.flag("use_ring");
    g.distractor_size_min = cfg.real("distractor_size_min");
    g.distractor_size_max = cfg.real("distractor_size_max");
    g.distractor_intensity_min = cfg.real("distractor_intensity_min");
    g.distractor_intensity_max = cfg.real("distractor_intensity_max");
    g.background = parse_background(cfg.text("background"));
    g.background_level = cfg.real("background_level");
    const fs::path out = prepare_out(cfg);
    const DatasetManifest m = gen_dataset(g, out);
    log("wrote " + std::to_string(m.count) + " pairs to " + out.string());
    return 0;
}

TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.rate = cfg.real("rate");
    t.epochs = cfg.size("epochs");
    t.batch = cfg.size("batch");
    t.lr = cfg.real("lr");
    t.seed = cfg.integer("seed");
    if (cfg.text("loss") != "mse") throw UsageError("loss must be 'mse'");
    t.validate();
    return t;
}

int cmd_train(const RunConfig& cfg) {
    TrainConfig t = train_config(cfg);
    t.checkpoint_every = cfg.size("checkpoint_every");
    const Dataset data = load_dataset(manifest_path(cfg.text("data")));
    std::optional<ModelCheckpoint> resume;
    if (cfg.has("resume")) resume = load_checkpoint(cfg.text("resume"));
    const fs::path out = prepare_out(cfg);
    if (t.checkpoint_every) {
        t.checkpoint_dir = (out / "checkpoints").string();
        fs::create_directories(t.checkpoint_dir);
    }
    log("training: " + std::to_string(data.train.size()) + " train / " + std::to_string(data.validation.size()) +
        " validation samples, M = " + std::to_string(measurement_count(t.rate, data.side)));
    const TrainResult res = train(data, t, resume ? &*resume : nullptr, [&](const EpochRecord& r) {
        log("epoch " + std::to_string(r.epoch) + "/" + std::to_string(t.epochs) + " train_loss=" + fmt(r.train_loss) +
            " val_psnr=" + fmt(r.val_psnr) + " val_ssim=" + fmt(r.val_ssim));
    });
    save_checkpoint((out / "model.spck").string(), res.checkpoint);
    write_text(out / "history.csv", res.history.csv());
    const PatternStack patterns = binarize(res.checkpoint.model.latent);
    write_previews(out, data, data.validation, cfg.size("previews"),
                   [&](const Sample& s) { return predict(patterns, res.checkpoint.model.recon, s.scene); });
    return 0;
}

int cmd_export_patterns(const RunConfig& cfg) {
    const ModelCheckpoint ck = load_checkpoint(cfg.text("checkpoint"));
    const PatternStack stack = binarize(ck.model.latent);
    const std::size_t frames = std::min(cfg.size("dmd_frames"), stack.count());
    const std::size_t factor = cfg.size("dmd_factor");
    if (frames) tile_for_dmd(stack, 0, factor); // fail before writing anything
    const fs::path out = prepare_out(cfg);
    write_patterns((out / "patterns.spip").string(), stack);
    for (std::size_t m = 0; m < frames; ++m) {
        const TiledFrame f = tile_for_dmd(stack, m, factor);
        Image img(f.height, f.width);
        for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = f.mirrors[i];
        char name[40];
        std::snprintf(name, sizeof name, "dmd_%05zu.pgm", m);
        write_pgm((out / name).string(), img);
    }
    log("exported " + std::to_string(stack.count()) + " patterns of side " + std::to_string(stack.side()));
    return 0;
}

int cmd_acquire(const RunConfig& cfg) {
    const PatternStack stack = read_patterns(cfg.text("patterns"));
    Image scene = read_pgm(cfg.text("scene"));
    ScatterConfig sc{cfg.real("scatter_sigma"), cfg.real("scatter_base")};
    sc.validate();
    NoiseConfig noise;
    noise.gaussian_sigma = cfg.real("noise_sigma");
    if (cfg.size("quant_bits")) noise.quantization_bits = static_cast<unsigned>(cfg.size("quant_bits"));
    noise.seed = cfg.integer("seed");
    noise.scheme = parse_acquisition_scheme(cfg.text("scheme"));
    noise.validate();
    if (sc.psf_sigma > 0.0 || sc.base_level > 0.0) scene = scatter(scene, sc);
    const std::vector<double> y = acquire(scene, stack, noise);
    const fs::path out = prepare_out(cfg);
    write_measurements((out / "measurements.spim").string(), y);
    write_text(out / "measurements.csv", measurements_csv(y));
    return 0;
}

int cmd_reconstruct(const RunConfig& cfg) {
    const ModelCheckpoint ck = load_checkpoint(cfg.text("checkpoint"));
    const std::vector<double> y = read_measurements(cfg.text("measurements"));
    if (y.size() != ck.model.measurements()) {
        throw DimensionError("checkpoint expects " + std::to_string(ck.model.measurements()) + " measurements, file has " +
                             std::to_string(y.size()));
    }
    const Image img = reconstruct(ck.model.recon, y);
    const fs::path out = prepare_out(cfg);
    write_pgm((out / "reconstruction.pgm").string(), img);
    return 0;
}

std::string eval_summary(const EvalReport& r) {
    return "mean_psnr=" + fmt(r.mean_psnr) + "\nmean_ssim=" + fmt(r.mean_ssim) + "\nmean_loss=" + fmt(r.mean_loss) +
           "\nmean_selectivity=" + fmt(r.mean_selectivity) + "\n";
}

int cmd_evaluate(const RunConfig& cfg) {
    const ModelCheckpoint ck = load_checkpoint(cfg.text("checkpoint"));
    Dataset data = load_dataset(manifest_path(cfg.text("data")));
    const Split split = parse_split(cfg.text("split"));
    const std::string corruption = cfg.text("corruption");
    const double level = cfg.real("level");
    if (corruption != "none") {
        const Corruption kind = corruption == "pepper"     ? Corruption::pepper
                                : corruption == "gaussian" ? Corruption::gaussian
                                                           : throw UsageError("corruption must be none, pepper or gaussian");
        for (std::size_t i : split_indices(data, split)) {
            data.samples[i].scene = corrupt(data.samples[i].scene, kind, level, derive_seed(cfg.integer("seed"), i));
        }
    }
    const EvalReport rep = evaluate(ck, data, split);
    const fs::path out = prepare_out(cfg);
    write_text(out / "report.csv", rep.csv());
    write_text(out / "summary.txt", eval_summary(rep));
    const PatternStack patterns = binarize(ck.model.latent);
    write_previews(out, data, split_indices(data, split), cfg.size("previews"),
                   [&](const Sample& s) { return predict(patterns, ck.model.recon, s.scene); });
    std::cout << eval_summary(rep);
    return 0;
}

int cmd_coherence(const RunConfig& cfg) {
    const CoherenceReport r = mutual_coherence(read_patterns(cfg.text("patterns")));
    std::cout << r.summary() << std::endl;
    if (cfg.has("out")) write_text(prepare_out(cfg) / "coherence.txt", r.summary() + "\n");
    return 0;
}

int cmd_sweep(const RunConfig& cfg) {
    TrainConfig t = train_config(cfg);
    const std::vector<double> rates = cfg.reals("rates");
    const std::size_t workers = cfg.size("workers");
    if (workers == 0) throw UsageError("workers must be >= 1");
    const Dataset data = load_dataset(manifest_path(cfg.text("data")));
    const fs::path out = prepare_out(cfg);
    const SweepReport rep = rate_sweep(
        data, rates, t,
        [&](double rate, const TrainResult& res) {
            log("rate " + fmt(rate) + " done");
            save_checkpoint((out / ("model_rate" + fmt(rate) + ".spck")).string(), res.checkpoint);
        },
        workers);
    write_text(out / "sweep.csv", rep.csv());
    std::cout << rep.csv();
    return 0;
}

int cmd_pca_baseline(const RunConfig& cfg) {
    const std::vector<double> ks = cfg.reals("components");
    const Dataset data = load_dataset(manifest_path(cfg.text("data")));
    const Split split = parse_split(cfg.text("split"));
    const double rate = cfg.real("rate");
    std::mt19937_64 rng(derive_seed(cfg.integer("seed"), 7));
    const PatternStack patterns = PatternStack::random(measurement_count(rate, data.side), data.side, rng);
    std::ostringstream csv;
    csv << "components,M,condition,psnr,ssim,selectivity\n";
    for (double k : ks) {
        if (k < 0 || k != std::floor(k)) throw UsageError("components must be non-negative integers");
        const PcaReport r = pca_baseline(data, rate, static_cast<std::size_t>(k), cfg.integer("seed"), split, &patterns);
        csv << r.components << ',' << r.measurements << ',' << fmt(r.condition) << ',' << fmt(r.eval.mean_psnr) << ','
            << fmt(r.eval.mean_ssim) << ',' << fmt(r.eval.mean_selectivity) << '\n';
    }
    const fs::path out = prepare_out(cfg);
    write_text(out / "pca.csv", csv.str());
    std::cout << csv.str();
    return 0;
}

int cmd_featurespace_demo(const RunConfig& cfg) {
    const FeatureSpaceInstance inst = make_featurespace_instance(cfg.size("dim"), cfg.size("objects"), cfg.size("per_object"),
                                                                 cfg.size("shared"), cfg.integer("seed"));
    const SelectionResult r = featurespace_select(inst);
    std::ostringstream os;
    os << "dim=" << inst.dim() << "\nobjects=" << inst.subspaces.size() << "\nshared=" << cfg.size("shared")
       << "\nisolated=" << (target_isolated(inst) ? 1 : 0) << "\nleakage=" << fmt(r.leakage) << '\n';
    const fs::path out = prepare_out(cfg);
    write_text(out / "featurespace.txt", os.str());
    std::cout << os.str();
    return 0;
}

// ---------------------------------------------------------------- wiring

struct Command {
    std::string name, help;
    std::vector<KeySpec> keys;
    int (*run)(const RunConfig&);
};

std::vector<KeySpec> train_keys() {
    return {{"data", Kind::path, "", "dataset directory or manifest", true},
            kOut,
            {"rate", Kind::real, "0.1", "sampling rate M / N^2"},
            {"epochs", Kind::integer, "30", "training epochs"},
            {"batch", Kind::integer, "16", "mini-batch size"},
            {"lr", Kind::real, "0.0002", "Adam learning rate"},
            {"seed", Kind::integer, "1", "master seed"},
            {"loss", Kind::text, "mse", "training loss"}};
}

std::vector<Command> commands() {
    GenConfig g;
    std::vector<KeySpec> gen{kOut,
                             {"count", Kind::integer, std::to_string(g.count), "number of pairs"},
                             {"canvas", Kind::integer, std::to_string(g.canvas), "side N (32, 64 or 128)"},
                             {"seed", Kind::integer, std::to_string(g.seed), "master seed"}};
    for (const auto& [k, v] : gen_config_header(g)) {
        const std::string key = k.substr(4);
        const Kind kind = key.rfind("use_", 0) == 0                         ? Kind::flag
                          : key == "target" || key == "background"          ? Kind::text
                          : key == "petals" || key.find("distractors_") == 0 ? Kind::integer
                          : key == "shift_max"                              ? Kind::integer
                                                                            : Kind::real;
        gen.push_back({key, kind, v, "generator setting"});
    }

    auto train = train_keys();
    train.push_back({"checkpoint_every", Kind::integer, "0", "write a checkpoint every k epochs (0: off)"});
    train.push_back({"resume", Kind::path, "", "checkpoint to resume from"});
    train.push_back({"previews", Kind::integer, "4", "validation triptychs to write"});

    auto sweep = train_keys();
    sweep.push_back({"rates", Kind::text, "0.2,0.1,0.05,0.025", "comma-separated sampling rates"});
    sweep.push_back({"workers", Kind::integer, "1", "concurrent trainings"});

    return {
        {"gen-data", "Generate a synthetic labeled dataset", gen, cmd_gen_data},
        {"train", "Jointly train patterns and reconstructor", train, cmd_train},
        {"export-patterns",
         "Binarize a checkpoint's patterns to SPIP (and optional DMD frames)",
         {{"checkpoint", Kind::path, "", "SPCK checkpoint", true},
          kOut,
          {"dmd_frames", Kind::integer, "0", "number of 1024x768 DMD frames to write"},
          {"dmd_factor", Kind::integer, "10", "DMD magnification"}},
         cmd_export_patterns},
        {"acquire",
         "Simulate single-pixel acquisition of a scene",
         {{"patterns", Kind::path, "", "SPIP pattern stack", true},
          {"scene", Kind::path, "", "PGM scene", true},
          kOut,
          {"noise_sigma", Kind::real, "0", "detector noise, relative to mean |y|"},
          {"quant_bits", Kind::integer, "0", "ADC bits (0: off)"},
          {"scheme", Kind::text, "differential", "differential or calibrated"},
          {"scatter_sigma", Kind::real, "0", "scattering PSF sigma in pixels"},
          {"scatter_base", Kind::real, "0", "scattering stray-light level"},
          {"seed", Kind::integer, "1", "noise seed"}},
         cmd_acquire},
        {"reconstruct",
         "Reconstruct an image from SPIM measurements",
         {{"checkpoint", Kind::path, "", "SPCK checkpoint", true},
          {"measurements", Kind::path, "", "SPIM measurements", true},
          kOut},
         cmd_reconstruct},
        {"evaluate",
         "Score a checkpoint on a dataset split",
         {{"checkpoint", Kind::path, "", "SPCK checkpoint", true},
          {"data", Kind::path, "", "dataset directory or manifest", true},
          kOut,
          {"split", Kind::text, "validation", "train or validation"},
          {"corruption", Kind::text, "none", "none, pepper or gaussian"},
          {"level", Kind::real, "0", "corruption level"},
          {"seed", Kind::integer, "1", "corruption seed"},
          {"previews", Kind::integer, "4", "triptychs to write"}},
         cmd_evaluate},
        {"coherence",
         "Mutual coherence of a pattern stack",
         {{"patterns", Kind::path, "", "SPIP pattern stack", true},
          {"out", Kind::path, "", "optional output directory"}},
         cmd_coherence},
        {"sweep", "Train and score one model per sampling rate", sweep, cmd_sweep},
        {"pca-baseline",
         "Linear PCA reconstruction from random patterns",
         {{"data", Kind::path, "", "dataset directory or manifest", true},
          kOut,
          {"rate", Kind::real, "0.1", "sampling rate"},
          {"components", Kind::text, "10", "comma-separated component counts"},
          {"split", Kind::text, "validation", "train or validation"},
          {"seed", Kind::integer, "1", "pattern seed"}},
         cmd_pca_baseline},
        {"featurespace-demo",
         "Selection in a constructed feature space",
         {kOut,
          {"dim", Kind::integer, "64", "ambient dimension"},
          {"objects", Kind::integer, "3", "objects in the scene (first is the target)"},
          {"per_object", Kind::integer, "4", "features per object"},
          {"shared", Kind::integer, "0", "target features also used by the other objects"},
          {"seed", Kind::integer, "1", "seed"}},
         cmd_featurespace_demo},
    };
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Command> cmds = commands();
    CLI::App app{"spix: object-selective single-pixel imaging toolkit"};
    app.require_subcommand(1);

    struct Bound {
        CLI::App* sub;
        std::string config;
        std::map<std::string, std::string> flags;
        std::map<std::string, CLI::Option*> opts;
    };
    std::vector<Bound> bound(cmds.size());
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        Bound& b = bound[i];
        b.sub = app.add_subcommand(cmds[i].name, cmds[i].help);
        b.sub->add_option("--config", b.config, "key=value config file");
        for (const auto& k : cmds[i].keys) {
            std::string help = k.help;
            if (!k.fallback.empty()) help += " [" + k.fallback + "]";
            if (k.required) help += " (required)";
            b.opts[k.name] = b.sub->add_option("--" + k.name, b.flags[k.name], help);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!bound[i].sub->parsed()) continue;
        try {
            RunConfig cfg(cmds[i].name, cmds[i].keys);
            if (!bound[i].config.empty()) cfg.merge_file(bound[i].config);
            for (const auto& [name, opt] : bound[i].opts)
                if (opt->count()) cfg.set(name, bound[i].flags[name], "--" + name);
            cfg.check();
            return cmds[i].run(cfg);
        } catch (const UsageError& e) {
            std::cerr << "error: " << e.what() << "\n\n" << bound[i].sub->help();
            return 2;
        } catch (const ParameterError& e) {
            std::cerr << "error: " << e.what() << std::endl;
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << std::endl;
            return 1;
        }
    }
    return 2;
}

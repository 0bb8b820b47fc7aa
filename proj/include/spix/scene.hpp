// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------
//
// Procedural scene synthesis. A scene holds one designated target plus
// distractor shapes over an optional background; its label holds the
// target alone on black. Rasterization samples pixel centers, so a spec
// always renders to the same bytes.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spix/error.hpp"
#include "spix/image.hpp"

namespace spix {

enum class TargetKind { flower, disk, textured_blob };
enum class DistractorKind { square, triangle, ring };
enum class Background { none, gradient, speckle };

struct TargetShape {
    TargetKind kind = TargetKind::flower;
    int petals = 5;
    double cx = 0, cy = 0;  // pixel units, origin at the top-left corner
    double radius = 8;
    double rotation_deg = 0;
    double intensity = 1.0; // (0, 1]
    std::uint64_t texture_seed = 0;
};

struct DistractorShape {
    DistractorKind kind = DistractorKind::square;
    double cx = 0, cy = 0;
    double size = 4; // square/triangle side, ring outer radius
    double rotation_deg = 0;
    double intensity = 1.0;
};

struct SceneSpec {
    std::size_t canvas = 64;
    TargetShape target;
    std::vector<DistractorShape> distractors;
    Background background = Background::none;
    double background_level = 0.0;
    std::uint64_t seed = 0; // drives speckle backgrounds
};

struct LabeledPair {
    Image scene;
    Image label;
    Image distractor_mask;     // 1 where a distractor is visible, 0 elsewhere
    bool target_intact = true; // scene equals label on the label's support
};

namespace detail {

constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }

// Point expressed in a frame centered at (cx, cy) and rotated by rot degrees.
inline std::array<double, 2> local(double px, double py, double cx, double cy, double rot_deg) {
    const double dx = px - cx, dy = py - cy;
    const double c = std::cos(deg2rad(rot_deg)), s = std::sin(deg2rad(rot_deg));
    return {dx * c + dy * s, -dx * s + dy * c};
}

// Target value at a pixel center, 0 outside the shape.
inline double target_value(const TargetShape& t, double px, double py) {
    switch (t.kind) {
        case TargetKind::flower: {
            const auto [u0, v0] = local(px, py, t.cx, t.cy, t.rotation_deg);
            if (u0 * u0 + v0 * v0 <= 0.0625 * t.radius * t.radius) return t.intensity; // core disk, r/4
            const double a = 0.5 * t.radius, b = 0.2 * t.radius;
            for (int k = 0; k < t.petals; ++k) {
                const double ang = 2.0 * kPi * k / t.petals;
                const double u = u0 * std::cos(ang) + v0 * std::sin(ang) - a;
                const double v = -u0 * std::sin(ang) + v0 * std::cos(ang);
                if ((u / a) * (u / a) + (v / b) * (v / b) <= 1.0) return t.intensity;
            }
            return 0.0;
        }
        case TargetKind::disk: {
            const double dx = px - t.cx, dy = py - t.cy;
            return dx * dx + dy * dy <= t.radius * t.radius ? t.intensity : 0.0;
        }
        case TargetKind::textured_blob: {
            const double phase = static_cast<double>(t.texture_seed % 6283) / 1000.0;
            const auto [u, v] = local(px, py, t.cx, t.cy, t.rotation_deg);
            const double r = std::hypot(u, v);
            const double theta = std::atan2(v, u);
            if (r > t.radius * (1.0 + 0.15 * std::sin(3.0 * theta + phase))) return 0.0;
            const double tex = 0.5 + 0.5 * std::sin(0.9 * u + 0.4 * v + phase) * std::cos(0.5 * v - 0.3 * u);
            return t.intensity * (0.55 + 0.45 * tex);
        }
    }
    return 0.0;
}

inline double target_extent(const TargetShape& t) {
    return t.kind == TargetKind::textured_blob ? 1.15 * t.radius : t.radius;
}

inline bool distractor_covers(const DistractorShape& d, double px, double py) {
    const auto [u, v] = local(px, py, d.cx, d.cy, d.rotation_deg);
    switch (d.kind) {
        case DistractorKind::square: return std::abs(u) <= 0.5 * d.size && std::abs(v) <= 0.5 * d.size;
        case DistractorKind::triangle: {
            // Equilateral, side d.size, centroid at the origin, apex up.
            const double rc = d.size / std::sqrt(3.0);
            std::array<std::array<double, 2>, 3> p{};
            for (int k = 0; k < 3; ++k) {
                const double a = deg2rad(-90.0 + 120.0 * k);
                p[k] = {rc * std::cos(a), rc * std::sin(a)};
            }
            bool pos = false, neg = false;
            for (int k = 0; k < 3; ++k) {
                const auto& a = p[k];
                const auto& b = p[(k + 1) % 3];
                const double cross = (b[0] - a[0]) * (v - a[1]) - (b[1] - a[1]) * (u - a[0]);
                pos = pos || cross > 0;
                neg = neg || cross < 0;
            }
            return !(pos && neg);
        }
        case DistractorKind::ring: {
            const double r2 = u * u + v * v;
            return r2 <= d.size * d.size && r2 >= 0.36 * d.size * d.size;
        }
    }
    return false;
}

inline double distractor_extent(const DistractorShape& d) {
    switch (d.kind) {
        case DistractorKind::square: return d.size / std::sqrt(2.0);
        case DistractorKind::triangle: return d.size / std::sqrt(3.0);
        case DistractorKind::ring: return d.size;
    }
    return d.size;
}

inline void require_on_canvas(double cx, double cy, double extent, std::size_t n, const char* what) {
    const double N = static_cast<double>(n);
    if (cx + extent <= 0.0 || cy + extent <= 0.0 || cx - extent >= N || cy - extent >= N) {
        throw PlacementError(std::string(what) + " at (" + std::to_string(cx) + ", " + std::to_string(cy) +
                             ") lies entirely outside the " + std::to_string(n) + "px canvas");
    }
}

} // namespace detail

inline void validate(const SceneSpec& spec) {
    if (spec.canvas != 32 && spec.canvas != 64 && spec.canvas != 128) {
        throw ParameterError("canvas must be 32, 64 or 128, got " + std::to_string(spec.canvas));
    }
    if (!(spec.target.intensity > 0.0 && spec.target.intensity <= 1.0)) {
        throw ParameterError("target intensity must lie in (0, 1]");
    }
    if (spec.target.radius <= 0.0) throw ParameterError("target radius must be positive");
    if (spec.target.kind == TargetKind::flower && spec.target.petals < 1) throw ParameterError("flower needs petals");
    for (const auto& d : spec.distractors) {
        if (!(d.intensity >= 0.0 && d.intensity <= 1.0)) throw ParameterError("distractor intensity must lie in [0, 1]");
        if (d.size <= 0.0) throw ParameterError("distractor size must be positive");
    }
    if (!(spec.background_level >= 0.0 && spec.background_level <= 1.0)) {
        throw ParameterError("background level must lie in [0, 1]");
    }
}

// Painter's order: background, distractors, target.
inline LabeledPair render_scene(const SceneSpec& spec) {
    validate(spec);
    const std::size_t n = spec.canvas;
    detail::require_on_canvas(spec.target.cx, spec.target.cy, detail::target_extent(spec.target), n, "target");
    for (const auto& d : spec.distractors) {
        detail::require_on_canvas(d.cx, d.cy, detail::distractor_extent(d), n, "distractor");
    }

    LabeledPair out{Image(n, n), Image(n, n), Image(n, n), true};
    if (spec.background == Background::gradient) {
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x)
                out.scene.at(y, x) = spec.background_level * (static_cast<double>(x) + 0.5) / static_cast<double>(n);
    } else if (spec.background == Background::speckle) {
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> u(0.0, spec.background_level);
        for (double& v : out.scene.pixels) v = u(rng);
    }

    std::size_t target_pixels = 0;
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            for (const auto& d : spec.distractors) {
                if (detail::distractor_covers(d, px, py)) {
                    out.scene.at(y, x) = d.intensity;
                    out.distractor_mask.at(y, x) = 1.0;
                }
            }
            const double t = std::clamp(detail::target_value(spec.target, px, py), 0.0, 1.0);
            if (t > 0.0) {
                out.scene.at(y, x) = t;
                out.label.at(y, x) = t;
                out.distractor_mask.at(y, x) = 0.0;
                ++target_pixels;
            }
        }
    }
    if (target_pixels == 0) throw PlacementError("target renders no pixels on the canvas");
    for (std::size_t i = 0; i < out.label.size(); ++i) {
        if (out.label.pixels[i] > 0.0 && out.scene.pixels[i] != out.label.pixels[i]) out.target_intact = false;
    }
    return out;
}

inline double foreground_fraction(const Image& img) {
    const auto nz = std::count_if(img.pixels.begin(), img.pixels.end(), [](double v) { return v > 0.0; });
    return static_cast<double>(nz) / static_cast<double>(img.size());
}

// ---------------------------------------------------------------- corruption

enum class Corruption { pepper, gaussian };

inline Image corrupt(const Image& image, Corruption kind, double level, std::uint64_t seed) {
    if (!(level >= 0.0) || (kind == Corruption::pepper && level > 1.0)) {
        throw ParameterError("corruption level out of range: " + std::to_string(level));
    }
    Image out = image;
    if (level == 0.0) return out;
    std::mt19937_64 rng(seed);
    if (kind == Corruption::pepper) {
        std::bernoulli_distribution hit(level);
        for (double& v : out.pixels)
            if (hit(rng)) v = 0.0;
    } else {
        std::normal_distribution<double> noise(0.0, level);
        for (double& v : out.pixels) v = std::clamp(v + noise(rng), 0.0, 1.0);
    }
    return out;
}

// ---------------------------------------------------------------- datasets

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream seed for item `index` under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ (index * 0xd1b54a32d192ed03ULL));
}

struct GenConfig {
    std::size_t count = 200;
    std::size_t canvas = 32;
    std::uint64_t seed = 1;
    TargetKind target = TargetKind::flower;
    int petals = 5;
    double radius_frac = 0.3;       // target radius / canvas
    int shift_max = 0;              // translation magnitude bound in px; 0 -> round(8 * canvas / 64)
    double rotation_deg = 20.0;
    double intensity_min = 0.8, intensity_max = 1.0;
    int distractors_min = 1, distractors_max = 3;
    bool use_square = true, use_triangle = true, use_ring = false;
    double distractor_size_min = 0.14, distractor_size_max = 0.22; // fraction of canvas
    double distractor_intensity_min = 0.4, distractor_intensity_max = 1.0;
    Background background = Background::none;
    double background_level = 0.2;

    int effective_shift_max() const {
        if (shift_max > 0) return shift_max;
        return std::max(1, static_cast<int>(std::lround(8.0 * static_cast<double>(canvas) / 64.0)));
    }
};

inline const char* to_string(TargetKind k) {
    switch (k) {
        case TargetKind::flower: return "flower";
        case TargetKind::disk: return "disk";
        case TargetKind::textured_blob: return "textured_blob";
    }
    return "?";
}
inline const char* to_string(Background b) {
    switch (b) {
        case Background::none: return "none";
        case Background::gradient: return "gradient";
        case Background::speckle: return "speckle";
    }
    return "?";
}
inline TargetKind parse_target_kind(const std::string& s) {
    if (s == "flower") return TargetKind::flower;
    if (s == "disk") return TargetKind::disk;
    if (s == "textured_blob") return TargetKind::textured_blob;
    throw ParameterError("unknown target kind '" + s + "'");
}
inline Background parse_background(const std::string& s) {
    if (s == "none") return Background::none;
    if (s == "gradient") return Background::gradient;
    if (s == "speckle") return Background::speckle;
    throw ParameterError("unknown background '" + s + "'");
}

// Draws the scene description of one sample from its own seed. Poses follow
// the Flower recipe: centered or shifted up/left/right, optionally rotated.
inline SceneSpec sample_scene_spec(const GenConfig& cfg, std::uint64_t sample_seed) {
    std::mt19937_64 rng(sample_seed);
    auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
    auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

    const double N = static_cast<double>(cfg.canvas);
    SceneSpec spec;
    spec.canvas = cfg.canvas;
    spec.seed = sample_seed;
    spec.background = cfg.background;
    spec.background_level = cfg.background == Background::none ? 0.0 : cfg.background_level;

    TargetShape& t = spec.target;
    t.kind = cfg.target;
    t.petals = cfg.petals;
    t.radius = cfg.radius_frac * N;
    t.cx = 0.5 * N;
    t.cy = 0.5 * N;
    const int direction = pick(0, 3); // 0 none, 1 up, 2 left, 3 right
    const int offset = direction == 0 ? 0 : pick(1, cfg.effective_shift_max());
    if (direction == 1) t.cy -= offset;
    if (direction == 2) t.cx -= offset;
    if (direction == 3) t.cx += offset;
    t.rotation_deg = pick(0, 1) ? cfg.rotation_deg : 0.0;
    t.intensity = uni(cfg.intensity_min, cfg.intensity_max);
    t.texture_seed = rng();

    std::vector<DistractorKind> kinds;
    if (cfg.use_square) kinds.push_back(DistractorKind::square);
    if (cfg.use_triangle) kinds.push_back(DistractorKind::triangle);
    if (cfg.use_ring) kinds.push_back(DistractorKind::ring);
    const int nd = kinds.empty() ? 0 : pick(cfg.distractors_min, cfg.distractors_max);
    const double keep_out = detail::target_extent(t);
    for (int i = 0; i < nd; ++i) {
        DistractorShape d;
        d.kind = kinds[static_cast<std::size_t>(pick(0, static_cast<int>(kinds.size()) - 1))];
        d.size = uni(cfg.distractor_size_min, cfg.distractor_size_max) * N;
        if (d.kind == DistractorKind::ring) d.size *= 0.5;
        d.rotation_deg = uni(0.0, 90.0);
        d.intensity = uni(cfg.distractor_intensity_min, cfg.distractor_intensity_max);
        const double ext = detail::distractor_extent(d);
        // Prefer spots clear of the target; after 50 misses keep the last draw.
        for (int attempt = 0; attempt < 50; ++attempt) {
            d.cx = uni(ext, N - ext);
            d.cy = uni(ext, N - ext);
            if (std::hypot(d.cx - t.cx, d.cy - t.cy) > keep_out + ext) break;
        }
        spec.distractors.push_back(d);
    }
    return spec;
}

struct ManifestRecord {
    std::size_t index = 0;
    std::string scene_path; // relative to the manifest directory
    std::string label_path;
    bool validation = false;
};

struct DatasetManifest {
    std::size_t count = 0;
    std::size_t canvas = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> extra; // further header lines, in order
    std::vector<ManifestRecord> records;
    std::filesystem::path base_dir;

    std::vector<std::size_t> split(bool validation) const {
        std::vector<std::size_t> idx;
        for (const auto& r : records)
            if (r.validation == validation) idx.push_back(r.index);
        return idx;
    }
    std::string header(const std::string& key, const std::string& fallback = {}) const {
        for (const auto& [k, v] : extra)
            if (k == key) return v;
        return fallback;
    }
};

inline std::string manifest_text(const DatasetManifest& m) {
    std::ostringstream os;
    os << "count=" << m.count << "\ncanvas=" << m.canvas << "\nseed=" << m.seed << '\n';
    for (const auto& [k, v] : m.extra) os << k << '=' << v << '\n';
    for (const auto& r : m.records) {
        os << r.index << '\t' << r.scene_path << '\t' << r.label_path << '\t' << (r.validation ? "validation" : "train")
           << '\n';
    }
    return os.str();
}

inline DatasetManifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {}) {
    DatasetManifest m;
    m.base_dir = std::move(base_dir);
    std::istringstream is(text);
    std::string line;
    bool have_count = false, have_canvas = false, have_seed = false;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.find('\t') == std::string::npos) {
            const auto eq = line.find('=');
            if (eq == std::string::npos || !m.records.empty()) {
                throw ValidationError("manifest line " + std::to_string(lineno) + ": expected key=value header");
            }
            const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
            if (k == "count") m.count = std::stoul(v), have_count = true;
            else if (k == "canvas") m.canvas = std::stoul(v), have_canvas = true;
            else if (k == "seed") m.seed = std::stoull(v), have_seed = true;
            else m.extra.emplace_back(k, v);
            continue;
        }
        std::istringstream ls(line);
        ManifestRecord r;
        std::string split;
        if (!(std::getline(ls >> r.index >> std::ws, r.scene_path, '\t') && std::getline(ls, r.label_path, '\t') &&
              std::getline(ls, split))) {
            throw ValidationError("manifest line " + std::to_string(lineno) + ": malformed record");
        }
        if (split != "train" && split != "validation") {
            throw ValidationError("manifest line " + std::to_string(lineno) + ": unknown split '" + split + "'");
        }
        r.validation = split == "validation";
        m.records.push_back(std::move(r));
    }
    if (!have_count || !have_canvas || !have_seed) throw ValidationError("manifest missing count/canvas/seed header");
    if (m.records.size() != m.count) throw ValidationError("manifest count does not match record count");
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        if (m.records[i].index != i) throw ValidationError("manifest indices must run 0..count-1");
    }
    return m;
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path.string(), "cannot open manifest");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_manifest(ss.str(), path.parent_path());
}

inline std::string mask_path_for(const std::string& label_path) {
    const std::string suffix = "_label.pgm";
    if (label_path.size() < suffix.size() || label_path.compare(label_path.size() - suffix.size(), suffix.size(), suffix)) {
        return {};
    }
    return label_path.substr(0, label_path.size() - suffix.size()) + "_distractors.pgm";
}

inline std::vector<std::pair<std::string, std::string>> gen_config_header(const GenConfig& c) {
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    return {{"gen.target", to_string(c.target)},
            {"gen.petals", std::to_string(c.petals)},
            {"gen.radius_frac", num(c.radius_frac)},
            {"gen.shift_max", std::to_string(c.shift_max)},
            {"gen.rotation_deg", num(c.rotation_deg)},
            {"gen.intensity_min", num(c.intensity_min)},
            {"gen.intensity_max", num(c.intensity_max)},
            {"gen.distractors_min", std::to_string(c.distractors_min)},
            {"gen.distractors_max", std::to_string(c.distractors_max)},
            {"gen.use_square", std::to_string(int(c.use_square))},
            {"gen.use_triangle", std::to_string(int(c.use_triangle))},
            {"gen.use_ring", std::to_string(int(c.use_ring))},
            {"gen.distractor_size_min", num(c.distractor_size_min)},
            {"gen.distractor_size_max", num(c.distractor_size_max)},
            {"gen.distractor_intensity_min", num(c.distractor_intensity_min)},
            {"gen.distractor_intensity_max", num(c.distractor_intensity_max)},
            {"gen.background", to_string(c.background)},
            {"gen.background_level", num(c.background_level)}};
}

// Rebuilds the generator configuration recorded in a manifest header.
inline GenConfig gen_config_from_manifest(const DatasetManifest& m) {
    GenConfig c;
    c.count = m.count;
    c.canvas = m.canvas;
    c.seed = m.seed;
    auto d = [&](const char* k, double fb) { auto v = m.header(k); return v.empty() ? fb : std::stod(v); };
    auto i = [&](const char* k, int fb) { auto v = m.header(k); return v.empty() ? fb : std::stoi(v); };
    c.target = parse_target_kind(m.header("gen.target", to_string(c.target)));
    c.petals = i("gen.petals", c.petals);
    c.radius_frac = d("gen.radius_frac", c.radius_frac);
    c.shift_max = i("gen.shift_max", c.shift_max);
    c.rotation_deg = d("gen.rotation_deg", c.rotation_deg);
    c.intensity_min = d("gen.intensity_min", c.intensity_min);
    c.intensity_max = d("gen.intensity_max", c.intensity_max);
    c.distractors_min = i("gen.distractors_min", c.distractors_min);
    c.distractors_max = i("gen.distractors_max", c.distractors_max);
    c.use_square = i("gen.use_square", c.use_square) != 0;
    c.use_triangle = i("gen.use_triangle", c.use_triangle) != 0;
    c.use_ring = i("gen.use_ring", c.use_ring) != 0;
    c.distractor_size_min = d("gen.distractor_size_min", c.distractor_size_min);
    c.distractor_size_max = d("gen.distractor_size_max", c.distractor_size_max);
    c.distractor_intensity_min = d("gen.distractor_intensity_min", c.distractor_intensity_min);
    c.distractor_intensity_max = d("gen.distractor_intensity_max", c.distractor_intensity_max);
    c.background = parse_background(m.header("gen.background", to_string(c.background)));
    c.background_level = d("gen.background_level", c.background_level);
    return c;
}

inline std::size_t validation_count(std::size_t count) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(count))));
}

// Renders every pair in memory; the last 10% of indices form the validation split.
inline std::vector<LabeledPair> generate_pairs(const GenConfig& cfg) {
    if (cfg.count < 10) throw ParameterError("dataset count must be >= 10");
    std::vector<LabeledPair> pairs;
    pairs.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) {
        pairs.push_back(render_scene(sample_scene_spec(cfg, derive_seed(cfg.seed, i))));
    }
    return pairs;
}

// Writes PGM triples (scene, label, distractor mask) plus manifest.txt into `dir`.
inline DatasetManifest gen_dataset(const GenConfig& cfg, const std::filesystem::path& dir) {
    const auto pairs = generate_pairs(cfg);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError(dir.string(), "cannot create dataset directory");

    DatasetManifest m;
    m.count = cfg.count;
    m.canvas = cfg.canvas;
    m.seed = cfg.seed;
    m.base_dir = dir;
    m.extra = gen_config_header(cfg);
    m.extra.emplace_back("masks", "distractors");
    std::string occluded;
    const std::size_t first_val = cfg.count - validation_count(cfg.count);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "%05zu", i);
        ManifestRecord r{i, std::string(stem) + "_scene.pgm", std::string(stem) + "_label.pgm", i >= first_val};
        write_pgm((dir / r.scene_path).string(), pairs[i].scene);
        write_pgm((dir / r.label_path).string(), pairs[i].label);
        write_pgm((dir / mask_path_for(r.label_path)).string(), pairs[i].distractor_mask);
        if (!pairs[i].target_intact) occluded += (occluded.empty() ? "" : ",") + std::to_string(i);
        m.records.push_back(std::move(r));
    }
    m.extra.emplace_back("occluded", occluded);
    const auto path = dir / "manifest.txt";
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path.string(), "cannot write manifest");
    os << manifest_text(m);
    if (!os) throw IoError(path.string(), "cannot write manifest");
    return m;
}

} // namespace spix

// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "common.hpp"

using namespace spix;
using namespace spix::testing;

namespace {

SceneSpec flower_spec(double rotation) {
    SceneSpec s;
    s.canvas = 64;
    s.target.cx = 32;
    s.target.cy = 32;
    s.target.radius = 18;
    s.target.rotation_deg = rotation;
    s.target.intensity = 0.9;
    return s;
}

std::size_t nonzero(const Image& img) {
    return static_cast<std::size_t>(std::count_if(img.pixels.begin(), img.pixels.end(), [](double v) { return v > 0; }));
}

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

} // namespace

TEST_CASE("a scene without distractors or background equals its label") {
    const LabeledPair p = render_scene(flower_spec(0));
    CHECK(p.scene == p.label);
    CHECK(p.target_intact);
    CHECK(nonzero(p.label) > 0);
}

TEST_CASE("rendering is deterministic") {
    SceneSpec s = flower_spec(20);
    s.distractors.push_back({DistractorKind::triangle, 10, 10, 9, 15, 0.6});
    s.background = Background::speckle;
    s.background_level = 0.2;
    s.seed = 42;
    const LabeledPair a = render_scene(s), b = render_scene(s);
    CHECK(a.scene == b.scene);
    CHECK(a.label == b.label);
    CHECK(a.distractor_mask == b.distractor_mask);
}

TEST_CASE("rotating a flower by 20 degrees keeps its area within 5%") {
    const double a0 = static_cast<double>(nonzero(render_scene(flower_spec(0)).label));
    const double a20 = static_cast<double>(nonzero(render_scene(flower_spec(20)).label));
    CHECK(std::abs(a20 - a0) / a0 < 0.05);
}

TEST_CASE("labels hold the target only; the scene holds everything") {
    SceneSpec s = flower_spec(0);
    s.distractors.push_back({DistractorKind::square, 6, 6, 8, 0, 0.5});
    s.distractors.push_back({DistractorKind::ring, 56, 56, 6, 0, 0.7});
    s.background = Background::gradient;
    s.background_level = 0.3;
    const LabeledPair p = render_scene(s);
    for (std::size_t i = 0; i < p.label.size(); ++i) {
        CHECK(p.scene.pixels[i] >= 0.0);
        CHECK(p.scene.pixels[i] <= 1.0);
        if (p.label.pixels[i] > 0) {
            CHECK(p.scene.pixels[i] == p.label.pixels[i]);
            CHECK(p.distractor_mask.pixels[i] == 0.0);
        }
    }
    CHECK(p.scene.at(6, 6) == 0.5);
    CHECK(p.distractor_mask.at(6, 6) == 1.0);
    CHECK(p.label.at(6, 6) == 0.0);
    CHECK(p.label.at(0, 63) == 0.0);
    CHECK(p.scene.at(0, 63) > 0.0); // gradient background
}

TEST_CASE("the target is painted over distractors") {
    SceneSpec s = flower_spec(0);
    s.distractors.push_back({DistractorKind::square, 32, 32, 10, 0, 0.3});
    const LabeledPair p = render_scene(s);
    CHECK(p.scene.at(32, 32) == p.label.at(32, 32));
    CHECK(p.target_intact);
}

TEST_CASE("shapes entirely off the canvas are rejected") {
    SceneSpec s = flower_spec(0);
    s.target.cx = -100;
    CHECK_THROWS_AS(render_scene(s), PlacementError);
    SceneSpec d = flower_spec(0);
    d.distractors.push_back({DistractorKind::square, 500, 10, 4, 0, 1.0});
    CHECK_THROWS_AS(render_scene(d), PlacementError);
    SceneSpec c = flower_spec(0);
    c.canvas = 48;
    CHECK_THROWS_AS(render_scene(c), ParameterError);
    SceneSpec z = flower_spec(0);
    z.target.intensity = 0.0;
    CHECK_THROWS_AS(render_scene(z), ParameterError);
}

TEST_CASE("every target kind renders") {
    for (TargetKind k : {TargetKind::flower, TargetKind::disk, TargetKind::textured_blob}) {
        SceneSpec s = flower_spec(0);
        s.target.kind = k;
        s.target.texture_seed = 3;
        CHECK(nonzero(render_scene(s).label) > 0);
    }
}

TEST_CASE("corrupt: zero level is the identity") {
    std::mt19937_64 rng(1);
    const Image img = random_image(32, rng);
    CHECK(corrupt(img, Corruption::pepper, 0.0, 9) == img);
    CHECK(corrupt(img, Corruption::gaussian, 0.0, 9) == img);
    CHECK_THROWS_AS(corrupt(img, Corruption::pepper, 1.5, 9), ParameterError);
    CHECK_THROWS_AS(corrupt(img, Corruption::gaussian, -0.1, 9), ParameterError);
}

TEST_CASE("corrupt: pepper fraction and gaussian spread") {
    const Image ones(64, 64, 1.0);
    const Image pep = corrupt(ones, Corruption::pepper, 0.1, 5);
    const double zeros = static_cast<double>(std::count(pep.pixels.begin(), pep.pixels.end(), 0.0)) / 4096.0;
    CHECK(std::abs(zeros - 0.1) <= 0.02);

    const Image half(64, 64, 0.5);
    const Image g = corrupt(half, Corruption::gaussian, 0.05, 6);
    double mean = 0, var = 0;
    for (double v : g.pixels) mean += v;
    mean /= 4096.0;
    for (double v : g.pixels) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / 4095.0);
    CHECK(std::abs(sd - 0.05) <= 0.005);
}

TEST_CASE("generated pairs: fractions, splits and determinism") {
    GenConfig cfg;
    cfg.count = 60;
    cfg.canvas = 32;
    cfg.seed = 11;
    const auto pairs = generate_pairs(cfg);
    REQUIRE(pairs.size() == 60);
    for (const auto& p : pairs) {
        const double f = foreground_fraction(p.label);
        CHECK(f >= 0.02);
        CHECK(f <= 0.4);
    }
    const auto again = generate_pairs(cfg);
    for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(pairs[i].scene == again[i].scene);
    CHECK(validation_count(10) == 1);
    CHECK(validation_count(200) == 20);
    cfg.count = 9;
    CHECK_THROWS_AS(generate_pairs(cfg), ParameterError);
}

TEST_CASE("generated flowers cover the 64 px recipe") {
    GenConfig cfg;
    cfg.count = 40;
    cfg.canvas = 64;
    cfg.seed = 3;
    for (const auto& p : generate_pairs(cfg)) {
        const double f = foreground_fraction(p.label);
        CHECK(f >= 0.02);
        CHECK(f <= 0.4);
    }
    std::set<std::string> seen;
    for (std::uint64_t i = 0; i < 60; ++i) {
        const SceneSpec s = sample_scene_spec(cfg, derive_seed(cfg.seed, i));
        CHECK((s.target.rotation_deg == 0.0 || s.target.rotation_deg == 20.0));
        const double dx = s.target.cx - 32.0, dy = s.target.cy - 32.0;
        CHECK(dy <= 0.0); // shifts go up, left or right, never down
        CHECK(std::abs(dx) <= 8.0);
        CHECK(std::abs(dy) <= 8.0);
        seen.insert(dx < 0 ? "left" : dx > 0 ? "right" : dy < 0 ? "up" : "none");
    }
    CHECK(seen.size() == 4);
}

TEST_CASE("gen_dataset writes a manifest that reproduces bitwise") {
    GenConfig cfg;
    cfg.count = 12;
    cfg.canvas = 32;
    cfg.seed = 21;
    const auto dir = scratch_dir("gen_a"), dir2 = scratch_dir("gen_b");
    const DatasetManifest m = gen_dataset(cfg, dir);
    CHECK(m.count == 12);
    CHECK(m.canvas == 32);
    CHECK(m.split(false).size() == 11);
    CHECK(m.split(true).size() == 1);

    const DatasetManifest back = read_manifest(dir / "manifest.txt");
    CHECK(back.count == 12);
    CHECK(back.seed == 21);
    std::set<std::size_t> all;
    for (auto i : back.split(false)) all.insert(i);
    for (auto i : back.split(true)) CHECK(all.insert(i).second);
    CHECK(all.size() == 12);

    const GenConfig regen = gen_config_from_manifest(back);
    gen_dataset(regen, dir2);
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        CHECK(slurp(entry.path()) == slurp(dir2 / entry.path().filename()));
    }

    const auto pairs = generate_pairs(cfg);
    for (const auto& r : back.records) {
        const Image label = read_pgm((dir / r.label_path).string());
        for (std::size_t i = 0; i < label.size(); ++i) {
            CHECK(label.pixels[i] == static_cast<double>(quantize8(pairs[r.index].label.pixels[i])) / 255.0);
        }
    }
}

TEST_CASE("occlusion flags are recorded and truthful") {
    GenConfig cfg;
    cfg.count = 30;
    cfg.canvas = 32;
    cfg.seed = 4;
    const auto dir = scratch_dir("gen_occ");
    const DatasetManifest m = gen_dataset(cfg, dir);
    std::set<std::size_t> occluded;
    std::stringstream ss(m.header("occluded"));
    for (std::string tok; std::getline(ss, tok, ',');) occluded.insert(std::stoul(tok));
    const auto pairs = generate_pairs(cfg);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].target_intact == (occluded.count(i) == 0));
        if (!pairs[i].target_intact) continue;
        for (std::size_t p = 0; p < pairs[i].label.size(); ++p)
            if (pairs[i].label.pixels[p] > 0) CHECK(pairs[i].scene.pixels[p] == pairs[i].label.pixels[p]);
    }
}

TEST_CASE("gen_dataset reports unwritable destinations") {
    GenConfig cfg;
    cfg.count = 10;
    const auto dir = scratch_dir("gen_blocked");
    std::ofstream(dir / "file") << "x";
    CHECK_THROWS_AS(gen_dataset(cfg, dir / "file" / "sub"), IoError);
}

TEST_CASE("PGM round trip quantizes by round(v * 255)") {
    const auto dir = scratch_dir("pgm");
    Image img(2, 3, std::vector<double>{0.0, 1.0, 0.5, 0.2, 0.999, 1.2});
    write_pgm((dir / "a.pgm").string(), img);
    const Image back = read_pgm((dir / "a.pgm").string());
    const std::vector<double> want{0.0, 1.0, 128.0 / 255, 51.0 / 255, 1.0, 1.0};
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(back.pixels[i] == want[i]);
    std::ofstream(dir / "bad.pgm", std::ios::binary) << "P5\n4 4\n255\nab";
    CHECK_THROWS_AS(read_pgm((dir / "bad.pgm").string()), FormatError);
}

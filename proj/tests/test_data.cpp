#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "shiftlab/data/blob.hpp"
#include "shiftlab/data/dataset.hpp"
#include "shiftlab/data/idx.hpp"
#include "shiftlab/data/store.hpp"

using namespace shiftlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("shiftlab-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

GlyphSample constant_item(float value, int size = 28) {
    GlyphSample s;
    s.class_id = 0;
    s.pixels = Tensor<float>::full({size, size}, value);
    return s;
}

double pixel_sum(const Tensor<float>& t) {
    double s = 0;
    for (Eigen::Index i = 0; i < t.numel(); ++i) s += t[i];
    return s;
}

}  // namespace

TEST_CASE("geometry base position scales the leftmost-centered convention") {
    const Geometry paper = Geometry::paper_scale();
    CHECK(paper.base_theta() == PositionTheta{25, 112});
    CHECK(paper.min_center() == 25);
    CHECK(paper.max_center() == 199);

    const Geometry desk = Geometry::desk();
    CHECK(desk.base_theta() == PositionTheta{11, 48});
    CHECK(desk.min_center() == 11);
    CHECK(desk.max_center() == 85);
}

TEST_CASE("place puts the paper-geometry item at columns 0..49, rows 87..136") {
    GlyphSample item = constant_item(1.0f, 50);  // already at item size, no resampling
    const Tensor<float> canvas = place(item, 224, 50, {25, 112});
    REQUIRE(canvas.shape() == Shape{224, 224});
    for (int y = 0; y < 224; ++y)
        for (int x = 0; x < 224; ++x) {
            const bool inside = y >= 87 && y <= 136 && x <= 49;
            CHECK(canvas.at(y, x) == (inside ? 1.0f : 0.0f));
        }
}

TEST_CASE("place of an all-zero item yields an empty canvas") {
    const Tensor<float> canvas = place(constant_item(0.0f), 96, 22, {11, 48});
    CHECK(pixel_sum(canvas) == 0.0);
}

TEST_CASE("place rejects footprints leaving the canvas") {
    CHECK_THROWS_AS(place(constant_item(1.0f), 224, 50, {10, 10}), ConfigError);
    CHECK_THROWS_AS(place(constant_item(1.0f), 96, 22, {90, 48}), ConfigError);
}

TEST_CASE("pastes are exact: canvas mass equals resized-item mass") {
    GlyphDataset d = synth_glyphs(3, 1, 0.0, 5);
    const GlyphSample& item = d.samples.front();
    const Tensor<float> resized = bilinear_resize(item.pixels, 22, 22);
    const Tensor<float> canvas = place(item, 96, 22, {40, 40});
    CHECK(pixel_sum(canvas) == doctest::Approx(pixel_sum(resized)).epsilon(1e-7));
}

TEST_CASE("bilinear resize preserves constants and interpolates midpoints") {
    Tensor<float> c = Tensor<float>::full({4, 4}, 0.75f);
    const Tensor<float> up = bilinear_resize(c, 9, 9);
    for (Eigen::Index i = 0; i < up.numel(); ++i) CHECK(up[i] == doctest::Approx(0.75));

    Tensor<float> ramp({1, 2}, {0.0f, 1.0f});
    const Tensor<float> wide = bilinear_resize(ramp, 1, 4);
    CHECK(wide.at(0, 1) == doctest::Approx(0.25));
    CHECK(wide.at(0, 2) == doctest::Approx(0.75));
}

TEST_CASE("fixed policy always returns its theta") {
    const Geometry g = Geometry::desk();
    const PlacementPolicy p = PlacementPolicy::one_location(g);
    Rng rng(1);
    for (int i = 0; i < 10; ++i) CHECK(sample_position(p, 0, rng) == g.base_theta());
}

TEST_CASE("uniform_full draws stay in bounds with the right mean") {
    const Geometry g = Geometry::paper_scale();
    const PlacementPolicy p = PlacementPolicy::fully_translated(g);
    Rng rng(2);
    double mx = 0, my = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const PositionTheta t = sample_position(p, 0, rng);
        CHECK(t.cx >= 25);
        CHECK(t.cx <= 199);
        CHECK(t.cy >= 25);
        CHECK(t.cy <= 199);
        mx += t.cx;
        my += t.cy;
    }
    // uniform over [25,199]: mean 112, sd 50.5; 3 sigma of the mean ~ 1.52
    CHECK(mx / n == doctest::Approx(112.0).epsilon(0.015));
    CHECK(my / n == doctest::Approx(112.0).epsilon(0.015));
}

TEST_CASE("uniform_full passes a coarse chi-square uniformity screen") {
    const Geometry g = Geometry::desk();
    const PlacementPolicy p = PlacementPolicy::fully_translated(g);
    Rng rng(3);
    const int n = 10000;
    int counts[16] = {};
    const int span = g.max_center() - g.min_center() + 1;
    for (int i = 0; i < n; ++i) {
        const PositionTheta t = sample_position(p, 0, rng);
        const int bx = std::min(3, (t.cx - g.min_center()) * 4 / span);
        const int by = std::min(3, (t.cy - g.min_center()) * 4 / span);
        ++counts[by * 4 + bx];
    }
    // the 75 admissible values split 19/19/19/18, so use exact bin widths
    int width[4] = {};
    for (int v = 0; v < span; ++v) ++width[std::min(3, v * 4 / span)];
    double chi2 = 0;
    for (int by = 0; by < 4; ++by)
        for (int bx = 0; bx < 4; ++bx) {
            const double expect =
                n * static_cast<double>(width[bx]) * width[by] / (span * span);
            const double diff = counts[by * 4 + bx] - expect;
            chi2 += diff * diff / expect;
        }
    // chi-square with 15 dof: p > 0.01 means chi2 below 30.58
    CHECK(chi2 < 30.58);
}

TEST_CASE("grid9 confines centers to the class's canvas third") {
    const Geometry g = Geometry::desk();
    const PlacementPolicy p = PlacementPolicy::make_grid9(g);
    Rng rng(4);
    // classes 0 and 1 share the top-left area
    for (int cls : {0, 1}) {
        for (int i = 0; i < 200; ++i) {
            const PositionTheta t = sample_position(p, cls, rng);
            CHECK(t.cx <= 31);
            CHECK(t.cy <= 31);
            CHECK(g.admissible(t));
        }
    }
    // class 17 sits in the bottom-right area
    for (int i = 0; i < 200; ++i) {
        const PositionTheta t = sample_position(p, 17, rng);
        CHECK(t.cx >= 64);
        CHECK(t.cy >= 64);
    }
    CHECK_THROWS_AS(sample_position(p, 18, rng), ConfigError);
}

TEST_CASE("quadrant conditions place and exclude as designed") {
    const Geometry g = Geometry::desk();
    Rng rng(5);
    const RegionRect quad{48, 0, 95, 47};

    SUBCASE("condition 1 keeps every footprint out of the quadrant") {
        const PlacementPolicy p = PlacementPolicy::make_quadrant(g, 1, 26);
        for (int i = 0; i < 500; ++i) {
            const PositionTheta t = sample_position(p, i % 26, rng);
            const int half = g.item / 2;
            const bool overlaps = t.cx - half + g.item - 1 >= quad.x0 && t.cy - half <= quad.y1;
            CHECK_FALSE(overlaps);
        }
    }

    SUBCASE("condition 2 restricts the last 7 classes to the quadrant") {
        const PlacementPolicy p = PlacementPolicy::make_quadrant(g, 2, 26);
        CHECK(p.class_in_quadrant(19));
        CHECK_FALSE(p.class_in_quadrant(18));
        for (int i = 0; i < 300; ++i) {
            const PositionTheta t = sample_position(p, 25, rng);
            const int half = g.item / 2;
            CHECK(t.cx - half >= quad.x0);
            CHECK(t.cy - half + g.item - 1 <= quad.y1);
        }
        for (int i = 0; i < 300; ++i) {
            const PositionTheta t = sample_position(p, 0, rng);
            const int half = g.item / 2;
            const bool overlaps = t.cx - half + g.item - 1 >= quad.x0 && t.cy - half <= quad.y1;
            CHECK_FALSE(overlaps);
        }
    }

    SUBCASE("condition 3 lets translated classes roam the whole canvas") {
        const PlacementPolicy p = PlacementPolicy::make_quadrant(g, 3, 26, 10);
        CHECK_FALSE(p.class_in_quadrant(9));
        CHECK(p.class_in_quadrant(10));
        bool quadrant_hit = false;
        for (int i = 0; i < 2000 && !quadrant_hit; ++i) {
            const PositionTheta t = sample_position(p, 0, rng);
            quadrant_hit = quad.contains(t);
        }
        CHECK(quadrant_hit);  // unrestricted classes do visit the quadrant
    }
}

TEST_CASE("synth_glyphs is seed-deterministic with distinct classes") {
    const GlyphDataset a = synth_glyphs(10, 3, 0.3, 42);
    const GlyphDataset b = synth_glyphs(10, 3, 0.3, 42);
    REQUIRE(a.samples.size() == 30);
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].class_id == b.samples[i].class_id);
        for (Eigen::Index p = 0; p < a.samples[i].pixels.numel(); ++p)
            CHECK(a.samples[i].pixels[p] == b.samples[i].pixels[p]);
    }
    // pairwise-distinct base glyphs
    for (int c1 = 0; c1 < 10; ++c1)
        for (int c2 = c1 + 1; c2 < 10; ++c2) {
            const auto& p1 = a.samples[static_cast<std::size_t>(c1) * 3].pixels;
            const auto& p2 = a.samples[static_cast<std::size_t>(c2) * 3].pixels;
            double l1 = 0;
            for (Eigen::Index p = 0; p < p1.numel(); ++p) l1 += std::abs(p1[p] - p2[p]);
            CHECK(l1 > 0.0);
        }
}

TEST_CASE("zero jitter gives bit-identical samples per class") {
    const GlyphDataset d = synth_glyphs(4, 5, 0.0, 7);
    for (int c = 0; c < 4; ++c) {
        const auto idx = d.class_index(c);
        REQUIRE(idx.size() == 5);
        for (std::size_t i = 1; i < idx.size(); ++i)
            for (Eigen::Index p = 0; p < 28 * 28; ++p)
                CHECK(d.samples[static_cast<std::size_t>(idx[i])].pixels[p] ==
                      d.samples[static_cast<std::size_t>(idx[0])].pixels[p]);
    }
    const GlyphDataset j = synth_glyphs(4, 5, 0.5, 7);
    bool any_differs = false;
    for (Eigen::Index p = 0; p < 28 * 28; ++p)
        any_differs = any_differs || j.samples[0].pixels[p] != j.samples[1].pixels[p];
    CHECK(any_differs);
}

TEST_CASE("build_split one-location keeps one bounding box; uniform covers the canvas") {
    const Geometry g = Geometry::desk();
    const GlyphDataset src = synth_glyphs(10, 3, 0.3, 11);

    const PlacedDataset one =
        build_split(src, PlacementPolicy::one_location(g), 5, 21);
    CHECK(one.size() == 50);
    for (const auto& t : one.positions) CHECK(t == g.base_theta());

    const PlacedDataset full =
        build_split(src, PlacementPolicy::fully_translated(g), 100, 22);
    std::set<std::pair<int, int>> cells;
    for (const auto& t : full.positions)
        cells.insert({(t.cx - g.min_center()) / 16, (t.cy - g.min_center()) / 16});
    // admissible span is 75 px -> 5x5 cells at 16 px granularity
    CHECK(cells.size() >= 20);  // >= 80% of 25
}

TEST_CASE("build_split is a pure function of source, policy and seed") {
    const GlyphDataset src = synth_glyphs(6, 4, 0.5, 13);
    const PlacementPolicy p = PlacementPolicy::fully_translated(Geometry::desk());
    const PlacedDataset a = build_split(src, p, 7, 31);
    const PlacedDataset b = build_split(src, p, 7, 31);
    REQUIRE(a.images.numel() == b.images.numel());
    for (Eigen::Index i = 0; i < a.images.numel(); ++i) CHECK(a.images[i] == b.images[i]);
    CHECK(a.labels == b.labels);

    const PlacedDataset c = build_split(src, p, 7, 32);
    bool differs = false;
    for (std::size_t i = 0; i < a.positions.size() && !differs; ++i)
        differs = !(a.positions[i] == c.positions[i]);
    CHECK(differs);
}

TEST_CASE("build_split grid9 places every class in its own area only") {
    const Geometry g = Geometry::desk();
    const GlyphDataset src = synth_glyphs(20, 2, 0.2, 17);
    const PlacementPolicy p = PlacementPolicy::make_grid9(g);
    const PlacedDataset d = build_split(src, p, 10, 41);
    CHECK(d.size() == 180);  // grid9 covers exactly 18 classes
    for (int i = 0; i < d.size(); ++i) {
        const int cls = d.labels[static_cast<std::size_t>(i)];
        const RegionRect area = p.grid9_area(p.grid9_area_of(cls));
        CHECK(area.contains(d.positions[static_cast<std::size_t>(i)]));
    }
}

TEST_CASE("every generated canvas keeps the item fully visible") {
    const Geometry g = Geometry::desk();
    const GlyphDataset src = synth_glyphs(5, 2, 0.8, 23);
    const PlacedDataset d = build_split(src, PlacementPolicy::fully_translated(g), 30, 51);
    for (int i = 0; i < d.size(); ++i) {
        // border pixels must all be zero unless the footprint touches them
        const auto& t = d.positions[static_cast<std::size_t>(i)];
        CHECK(g.admissible(t));
    }
}

TEST_CASE("blob round trip is bit exact and rejects corruption") {
    TempDir tmp;
    Rng rng(61);
    Tensor<float> t({3, 4, 5});
    for (Eigen::Index i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-5, 5));
    const std::string path = (tmp.path / "x.shb1").string();
    write_blob(path, t);
    const Tensor<float> back = read_blob(path);
    REQUIRE(back.shape() == t.shape());
    for (Eigen::Index i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);

    std::ofstream bad(tmp.path / "bad.shb1", std::ios::binary);
    bad << "NOPE";
    bad.close();
    CHECK_THROWS_AS(read_blob((tmp.path / "bad.shb1").string()), IoError);
    CHECK_THROWS_AS(read_blob((tmp.path / "missing.shb1").string()), IoError);
}

TEST_CASE("idx round trip preserves counts, labels and quantized pixels") {
    TempDir tmp;
    const GlyphDataset src = synth_glyphs(5, 4, 0.4, 29);
    const std::string img = (tmp.path / "img.idx").string();
    const std::string lab = (tmp.path / "lab.idx").string();
    write_idx(src, img, lab);

    const GlyphDataset back = load_idx(img, lab);
    REQUIRE(back.samples.size() == src.samples.size());
    CHECK(back.n_classes == 5);
    for (std::size_t i = 0; i < src.samples.size(); ++i) {
        CHECK(back.samples[i].class_id == src.samples[i].class_id);
        for (Eigen::Index p = 0; p < 28 * 28; ++p)
            CHECK(std::abs(back.samples[i].pixels[p] - src.samples[i].pixels[p]) <= 0.5f / 255.0f);
    }
}

TEST_CASE("idx loader rejects wrong magic, truncation and count mismatch") {
    TempDir tmp;
    const GlyphDataset src = synth_glyphs(3, 2, 0.0, 31);
    const std::string img = (tmp.path / "img.idx").string();
    const std::string lab = (tmp.path / "lab.idx").string();
    write_idx(src, img, lab);

    // labels file offered in the image slot: magic error
    CHECK_THROWS_WITH_AS(load_idx(lab, img), doctest::Contains("magic"), IoError);

    std::ofstream empty(tmp.path / "empty.idx", std::ios::binary);
    empty.close();
    CHECK_THROWS_AS(load_idx((tmp.path / "empty.idx").string(), lab), IoError);

    // truncate the image payload
    fs::resize_file(img, fs::file_size(img) - 100);
    CHECK_THROWS_WITH_AS(load_idx(img, lab), doctest::Contains("truncated"), IoError);
}

TEST_CASE("glyph and placed dataset directories round trip") {
    TempDir tmp;
    const GlyphDataset src = synth_glyphs(4, 3, 0.6, 37);
    const std::string gdir = (tmp.path / "glyphs").string();
    save_glyphs(gdir, src, 0.6, 37);
    const GlyphDataset gback = load_glyphs(gdir);
    REQUIRE(gback.samples.size() == src.samples.size());
    CHECK(gback.n_classes == src.n_classes);
    for (std::size_t i = 0; i < src.samples.size(); ++i)
        for (Eigen::Index p = 0; p < 28 * 28; ++p)
            CHECK(gback.samples[i].pixels[p] == src.samples[i].pixels[p]);

    const PlacedDataset placed =
        build_split(src, PlacementPolicy::fully_translated(Geometry::desk()), 3, 43);
    const std::string pdir = (tmp.path / "placed").string();
    save_placed(pdir, placed);
    const PlacedDataset pback = load_placed(pdir);
    CHECK(pback.geom == placed.geom);
    CHECK(pback.labels == placed.labels);
    for (Eigen::Index i = 0; i < placed.images.numel(); ++i)
        CHECK(pback.images[i] == placed.images[i]);
}

TEST_CASE("data root env var resolves relative paths") {
    TempDir tmp;
    std::ofstream((tmp.path / "exists.idx").string()) << "x";
    setenv("SHIFTLAB_DATA_ROOT", tmp.path.c_str(), 1);
    CHECK(resolve_data_path("sub/file.idx") == (tmp.path / "sub/file.idx").string());
    CHECK(resolve_data_path("/abs/file.idx") == "/abs/file.idx");
    unsetenv("SHIFTLAB_DATA_ROOT");
    CHECK(resolve_data_path("sub/file.idx") == "sub/file.idx");
}

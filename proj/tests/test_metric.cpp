#include <cmath>

#include "doctest.h"
#include "shiftlab/data/placement.hpp"
#include "shiftlab/metric/invariance.hpp"

using namespace shiftlab;

namespace {

// independent similarity: same formula, separate accumulation order
double reference_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    long double dot = 0, na = 0, nb = 0;
    for (std::size_t i = a.size(); i-- > 0;) {
        dot += static_cast<long double>(a[i]) * b[i];
        na += static_cast<long double>(a[i]) * a[i];
        nb += static_cast<long double>(b[i]) * b[i];
    }
    return static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

std::vector<double> activation_of(Model& model, const GlyphSample& item, const Geometry& g,
                                  PositionTheta theta, const std::string& layer) {
    const Tensor<float> canvas = place(item, g.canvas, g.item, theta);
    Tensor<float> batch({1, 1, g.canvas, g.canvas});
    std::copy_n(canvas.data(), canvas.numel(), batch.data());
    Tape<float> tape;
    const Tensor<float>& act = model.forward(tape, batch, false, layer).captured.value();
    return {act.data(), act.data() + act.numel()};
}

}  // namespace

TEST_CASE("cosine similarity handles the textbook cases") {
    CHECK(cosine_sim({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(cosine_sim({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine_sim({1, 2}, {2, 1}) == doctest::Approx(0.8));
    CHECK(cosine_sim({-1, -2}, {1, 2}) == doctest::Approx(-1.0));

    bool zero = false;
    CHECK(cosine_sim({0, 0}, {1, 2}, &zero) == 0.0);
    CHECK(zero);
    zero = false;
    CHECK(cosine_sim({0, 0}, {0, 0}, &zero) == 0.0);
    CHECK(zero);
    CHECK_THROWS_AS(cosine_sim({1, 2}, {1, 2, 3}), ShapeError);
}

TEST_CASE("invariance metric endpoints are exact") {
    CHECK(invariance_metric(1.0, 0.0) == 1.0);
    CHECK(invariance_metric(1.0, 0.73) == 1.0);
    CHECK(invariance_metric(0.5, 0.5) == 0.0);
    CHECK(invariance_metric(0.37, 0.37) == 0.0);
    CHECK(invariance_metric(0.9, 0.5) == doctest::Approx(0.8));
    CHECK_THROWS_AS(invariance_metric(0.99, 1.0 - 1e-7), NumericsError);
}

TEST_CASE("metric is monotone in T at fixed U") {
    for (double u : {0.0, 0.2, 0.6}) {
        double last = -2;
        for (double t : {0.1, 0.4, 0.7, 0.95}) {
            const double i = invariance_metric(t, u);
            CHECK(i > last);
            last = i;
        }
    }
}

TEST_CASE("horizontal sweep spans base to far edge in canvas/22 steps") {
    const Geometry desk = Geometry::desk();
    const auto sweep = horizontal_sweep(desk);
    REQUIRE(sweep.size() == 18);
    CHECK(sweep.front() == PositionTheta{11, 48});
    CHECK(sweep.back() == PositionTheta{85, 48});
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        CHECK(sweep[i].cx > sweep[i - 1].cx);
        CHECK(sweep[i].cy == 48);
        CHECK(desk.admissible(sweep[i]));
    }

    const auto paper = horizontal_sweep(Geometry::paper_scale());
    CHECK(paper.front().cx == 25);
    CHECK(paper.back().cx == 198);
}

TEST_CASE("zero displacement scores I=1 exactly for any model") {
    const Geometry g = Geometry::desk();
    const GlyphDataset items = synth_glyphs(5, 4, 0.4, 33);
    ArchSpec spec;
    spec.seed = 9;
    Model model(spec);

    InvarianceProbeConfig cfg;
    cfg.base = g.base_theta();
    cfg.displacements = {g.base_theta(), {40, 48}};
    cfg.R = 6;
    cfg.N = 30;
    cfg.seed = 1;
    const InvarianceResult res = invariance_profile(model, items, g, cfg);
    REQUIRE(res.entries.size() == 2);
    CHECK(res.entries[0].T == 1.0);
    CHECK(res.entries[0].I == 1.0);  // exact, not approximate
    CHECK(res.entries[1].I < 1.0);
    CHECK(res.layer == "fc1.relu");
    CHECK(res.zero_vector_count == 0);
}

TEST_CASE("profile matches an independent recomputation") {
    const Geometry g = Geometry::desk();
    const GlyphDataset items = synth_glyphs(4, 3, 0.5, 44);
    ArchSpec spec;
    spec.family = Family::plain_bn;
    spec.seed = 4;
    Model model(spec);

    InvarianceProbeConfig cfg;
    cfg.base = g.base_theta();
    cfg.displacements = {{33, 48}};
    cfg.R = 5;
    cfg.N = 12;
    cfg.seed = 7;
    const InvarianceResult res = invariance_profile(model, items, g, cfg);

    // re-draw the same probe items and pairs the way the profile does
    Rng item_rng(derive_seed(7, 0xA11));
    std::vector<int> pool{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    for (int i = 11; i > 0; --i) std::swap(pool[static_cast<std::size_t>(i)],
                                           pool[static_cast<std::size_t>(item_rng.uniform_int(0, i))]);
    Rng pair_rng(derive_seed(7, 0xB22));
    double t_sum = 0;
    for (int r = 0; r < 5; ++r) {
        const GlyphSample& item = items.samples[static_cast<std::size_t>(pool[static_cast<std::size_t>(r)])];
        t_sum += reference_cosine(activation_of(model, item, g, g.base_theta(), "fc1.relu"),
                                  activation_of(model, item, g, {33, 48}, "fc1.relu"));
    }
    double u_sum = 0;
    for (int n = 0; n < 12; ++n) {
        const int u = pair_rng.uniform_int(0, 11);
        int v = pair_rng.uniform_int(0, 10);
        if (v >= u) ++v;
        u_sum += reference_cosine(
            activation_of(model, items.samples[static_cast<std::size_t>(u)], g, g.base_theta(), "fc1.relu"),
            activation_of(model, items.samples[static_cast<std::size_t>(v)], g, {33, 48}, "fc1.relu"));
    }
    CHECK(res.entries[0].T == doctest::Approx(t_sum / 5).epsilon(1e-6));
    CHECK(res.entries[0].U == doctest::Approx(u_sum / 12).epsilon(1e-6));
}

TEST_CASE("profile is deterministic across runs") {
    const Geometry g = Geometry::desk();
    const GlyphDataset items = synth_glyphs(3, 4, 0.6, 55);
    ArchSpec spec;
    spec.seed = 2;
    Model model(spec);
    InvarianceProbeConfig cfg;
    cfg.base = g.base_theta();
    cfg.displacements = {{20, 48}, {60, 48}};
    cfg.R = 4;
    cfg.N = 10;
    cfg.seed = 3;
    const InvarianceResult a = invariance_profile(model, items, g, cfg);
    const InvarianceResult b = invariance_profile(model, items, g, cfg);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].T == b.entries[i].T);
        CHECK(a.entries[i].U == b.entries[i].U);
        CHECK(a.entries[i].I == b.entries[i].I);
    }
    CHECK(a.mean_I == b.mean_I);
}

TEST_CASE("a constant representation trips the degenerate-uniformity error") {
    const Geometry g = Geometry::desk();
    const GlyphDataset items = synth_glyphs(3, 3, 0.4, 66);
    ArchSpec spec;
    Model model(spec);
    // zero the head weights: logits collapse to the (nonzero) bias for every input
    for (Param& p : model.params()) {
        if (p.name == "logits.w") p.value = Tensor<float>::zeros(p.value.shape());
        if (p.name == "logits.b") p.value = Tensor<float>::full(p.value.shape(), 0.5f);
    }
    InvarianceProbeConfig cfg;
    cfg.base = g.base_theta();
    cfg.displacements = {{50, 48}};
    cfg.R = 3;
    cfg.N = 8;
    cfg.layer = "logits";
    CHECK_THROWS_AS(invariance_profile(model, items, g, cfg), NumericsError);
}

TEST_CASE("zero activations are flagged and scored 0") {
    const Geometry g = Geometry::desk();
    GlyphDataset items;
    items.id = "blank";
    items.n_classes = 2;
    for (int i = 0; i < 4; ++i) {
        GlyphSample s;
        s.class_id = i % 2;
        s.pixels = Tensor<float>::zeros({28, 28});
        items.samples.push_back(s);
    }
    ArchSpec spec;  // plain: zero input, zero biases -> zero flatten activations
    Model model(spec);
    InvarianceProbeConfig cfg;
    cfg.base = g.base_theta();
    cfg.displacements = {{40, 48}};
    cfg.R = 2;
    cfg.N = 4;
    const InvarianceResult res = invariance_profile(model, items, g, cfg);
    CHECK(res.zero_vector_count == 6);
    CHECK(res.entries[0].T == 0.0);
    CHECK(res.entries[0].U == 0.0);
    CHECK(res.entries[0].I == 0.0);
}

TEST_CASE("bad probe configs are rejected") {
    const Geometry g = Geometry::desk();
    const GlyphDataset items = synth_glyphs(2, 2, 0.0, 1);
    ArchSpec spec;
    Model model(spec);
    InvarianceProbeConfig cfg;
    cfg.base = g.base_theta();
    cfg.displacements = {{40, 48}};

    cfg.R = 1;
    CHECK_THROWS_AS(invariance_profile(model, items, g, cfg), ConfigError);
    cfg.R = 10;  // more than the 4 items available
    CHECK_THROWS_AS(invariance_profile(model, items, g, cfg), ConfigError);
    cfg.R = 2;
    cfg.N = 1;
    CHECK_THROWS_AS(invariance_profile(model, items, g, cfg), ConfigError);
    cfg.N = 4;
    cfg.displacements = {{5, 48}};  // clips the item
    CHECK_THROWS_AS(invariance_profile(model, items, g, cfg), ConfigError);
    cfg.displacements.clear();
    CHECK_THROWS_AS(invariance_profile(model, items, g, cfg), ConfigError);
}

#include "shiftlab/harness/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "shiftlab/core/error.hpp"
#include "shiftlab/data/placement.hpp"

namespace shiftlab {

std::map<std::string, Aggregate> aggregate_runs(const RunRecord& record) {
    if (record.outcomes.empty()) throw ConfigError("cannot aggregate an empty run record");
    std::map<std::string, Aggregate> out;
    for (const SeedOutcome& o : record.outcomes)
        for (const auto& [key, value] : o.metrics) {
            Aggregate& a = out[key];
            a.mean += value;
            a.n += 1;
        }
    for (auto& [key, a] : out) a.mean /= a.n;
    for (const SeedOutcome& o : record.outcomes)
        for (const auto& [key, value] : o.metrics) {
            Aggregate& a = out[key];
            a.stddev += (value - a.mean) * (value - a.mean);
        }
    for (auto& [key, a] : out) a.stddev = a.n > 1 ? std::sqrt(a.stddev / (a.n - 1)) : 0.0;
    return out;
}

namespace {

ArchSpec with_seed(ArchSpec spec, std::uint64_t seed) {
    spec.seed = seed;
    return spec;
}

TrainConfig with_train_seed(TrainConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    return cfg;
}

void store(const ModelSink& sink, SeedOutcome& out, const std::string& tag, std::uint64_t seed,
           Model& model) {
    if (!sink) return;
    const std::string path = sink(tag, seed, model);
    if (!path.empty()) out.checkpoints.emplace_back(tag, path);
}

/// Placed dataset with one position generator per class; sample choice and
/// positions derive from (seed, class, index) exactly like build_split.
PlacedDataset build_custom(const GlyphDataset& source, int n_classes, int n_per_class,
                           const Geometry& geom,
                           const std::function<PositionTheta(int, Rng&)>& position_of,
                           std::uint64_t seed) {
    const int total = n_classes * n_per_class;
    PlacedDataset out;
    out.geom = geom;
    out.n_classes = source.n_classes;
    out.source_id = source.id;
    out.policy_desc = "custom";
    out.seed = seed;
    out.images = Tensor<float>({total, 1, geom.canvas, geom.canvas});
    const Eigen::Index plane = static_cast<Eigen::Index>(geom.canvas) * geom.canvas;
    int row = 0;
    for (int c = 0; c < n_classes; ++c) {
        const std::vector<int> pool = source.class_index(c);
        if (pool.empty()) throw ConfigError("class " + std::to_string(c) + " has no items");
        for (int i = 0; i < n_per_class; ++i, ++row) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)));
            const GlyphSample& item =
                source.samples[static_cast<std::size_t>(pool[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<int>(pool.size()) - 1))])];
            const PositionTheta theta = position_of(c, rng);
            const Tensor<float> canvas = place(item, geom.canvas, geom.item, theta);
            std::copy_n(canvas.data(), plane, out.images.data() + row * plane);
            out.labels.push_back(c);
            out.positions.push_back(theta);
        }
    }
    return out;
}

double mean_over(const std::vector<double>& values, const std::vector<int>& classes) {
    double s = 0;
    for (int c : classes) s += values[static_cast<std::size_t>(c)];
    return s / static_cast<double>(classes.size());
}

}  // namespace

RunRecord run_experiment1(const E1Config& config, const ModelSink& sink) {
    RunRecord rec;
    rec.experiment_id = "E1";
    rec.arch = family_name(config.arch.family);
    const PlacementPolicy one_loc = PlacementPolicy::one_location(config.geom);
    const PlacementPolicy uniform = PlacementPolicy::fully_translated(config.geom);

    for (std::uint64_t s : config.seeds) {
        SeedOutcome out;
        out.seed = s;
        out.metrics["chance"] = 1.0 / config.arch.n_classes;
        const PlacedDataset train_set =
            build_split(config.task, one_loc, config.n_train_per_class, derive_seed(s, 0x7A1));
        const PlacedDataset test_set =
            build_split(config.task, uniform, config.n_test_per_class, derive_seed(s, 0x7A2));

        Model untrained(with_seed(config.arch, derive_seed(s, 0x100)));
        const TrainLog lg =
            train(untrained, train_set, with_train_seed(config.train_cfg, derive_seed(s, 0x101)));
        out.logs.emplace_back("untrained_onloc", lg);
        out.metrics["onloc_train_acc"] = lg.final_accuracy;
        out.metrics["translated_acc"] = evaluate(untrained, test_set);
        store(sink, out, "e1-untrained", s, untrained);
        if (config.n_probe_per_class > 0)
            out.grids.emplace_back(
                "untrained", density_map(untrained, probe_subset(config.task, config.n_probe_per_class),
                                         config.geom, config.grid_G));

        if (!config.rich.samples.empty()) {
            Model pre(with_seed(config.arch, derive_seed(s, 0x200)));
            const PlacedDataset rich_set = build_split(config.rich, uniform,
                                                       config.n_rich_per_class, derive_seed(s, 0x7A3));
            const TrainLog plg =
                train(pre, rich_set, with_train_seed(config.train_cfg, derive_seed(s, 0x201)));
            out.logs.emplace_back("pretrain", plg);
            out.metrics["pretrain_train_acc"] = plg.final_accuracy;
            const TrainLog flg =
                train(pre, train_set, with_train_seed(config.train_cfg, derive_seed(s, 0x202)));
            out.logs.emplace_back("pretrained_onloc", flg);
            out.metrics["pretrained_onloc_train_acc"] = flg.final_accuracy;
            out.metrics["pretrained_translated_acc"] = evaluate(pre, test_set);
            store(sink, out, "e1-pretrained", s, pre);
            if (config.n_probe_per_class > 0)
                out.grids.emplace_back(
                    "pretrained", density_map(pre, probe_subset(config.task, config.n_probe_per_class),
                                              config.geom, config.grid_G));
        }
        rec.outcomes.push_back(std::move(out));
    }
    return rec;
}

RunRecord run_experiment2(const E2Config& config, const ModelSink& sink) {
    RunRecord rec;
    rec.experiment_id = "E2";
    rec.arch = family_name(config.arch.family);
    const PlacementPolicy one_loc = PlacementPolicy::one_location(config.geom);
    const PlacementPolicy uniform = PlacementPolicy::fully_translated(config.geom);

    for (std::uint64_t s : config.seeds) {
        SeedOutcome out;
        out.seed = s;
        out.metrics["chance"] = 1.0 / config.arch.n_classes;
        const PlacedDataset rich_train =
            build_split(config.rich, uniform, config.n_rich_per_class, derive_seed(s, 0x8A1));
        const PlacedDataset rich_test =
            build_split(config.rich, uniform, config.n_test_per_class, derive_seed(s, 0x8A2));
        const PlacedDataset task_onloc =
            build_split(config.task, one_loc, config.n_task_per_class, derive_seed(s, 0x8A3));
        const PlacedDataset task_trans =
            build_split(config.task, uniform, config.n_test_per_class, derive_seed(s, 0x8A4));

        Model model(with_seed(config.arch, derive_seed(s, 0x300)));
        const TrainLog plg =
            train(model, rich_train, with_train_seed(config.pretrain_cfg, derive_seed(s, 0x301)));
        out.logs.emplace_back("pretrain", plg);
        out.metrics["pretrain_train_acc"] = plg.final_accuracy;
        out.metrics["pretrain_translated_acc"] = evaluate(model, rich_test);
        store(sink, out, "e2-pretrained", s, model);

        const TrainLog flg =
            train(model, task_onloc, with_train_seed(config.finetune_cfg, derive_seed(s, 0x302)));
        out.logs.emplace_back("finetune", flg);
        out.metrics["finetune_train_acc"] = flg.final_accuracy;
        out.metrics["translated_acc"] = evaluate(model, task_trans);
        out.metrics["pretrain_after_finetune_acc"] = evaluate(model, rich_test);
        store(sink, out, "e2-finetuned", s, model);

        if (config.with_control) {
            Model control(with_seed(config.arch, derive_seed(s, 0x400)));
            const TrainLog clg = train(control, task_onloc,
                                       with_train_seed(config.finetune_cfg, derive_seed(s, 0x401)));
            out.logs.emplace_back("control", clg);
            out.metrics["control_onloc_train_acc"] = clg.final_accuracy;
            out.metrics["control_translated_acc"] = evaluate(control, task_trans);
            store(sink, out, "e2-control", s, control);
        }
        rec.outcomes.push_back(std::move(out));
    }
    return rec;
}

RunRecord run_experiment3(const E3Config& config, const ModelSink& sink) {
    if (config.arch.n_classes != 18)
        throw ConfigError("experiment 3 uses a 9x2 class-area assignment; the model head must "
                          "have 18 classes, not " + std::to_string(config.arch.n_classes));
    RunRecord rec;
    rec.experiment_id = "E3";
    rec.arch = family_name(config.arch.family);
    const GlyphDataset src18 = take_classes(config.source, 18);
    const PlacementPolicy grid = PlacementPolicy::make_grid9(config.geom);
    const PlacementPolicy uniform = PlacementPolicy::fully_translated(config.geom);
    const PlacementPolicy one_loc = PlacementPolicy::one_location(config.geom);
    std::vector<int> all18(18);
    for (int c = 0; c < 18; ++c) all18[static_cast<std::size_t>(c)] = c;

    for (std::uint64_t s : config.seeds) {
        SeedOutcome out;
        out.seed = s;
        out.metrics["chance"] = 1.0 / 18.0;
        const PlacedDataset train_set =
            build_split(src18, grid, config.n_train_per_class, derive_seed(s, 0x9A1));

        Model model(with_seed(config.arch, derive_seed(s, 0x500)));
        const TrainLog lg =
            train(model, train_set, with_train_seed(config.train_cfg, derive_seed(s, 0x501)));
        out.logs.emplace_back("grid9", lg);
        out.metrics["train_acc"] = lg.final_accuracy;
        store(sink, out, "e3-grid9", s, model);

        const PlacedDataset own_set =
            build_split(src18, grid, config.n_test_per_class, derive_seed(s, 0x9A2));
        const PerClassAccuracy own = evaluate_per_class(model, own_set);

        const Geometry g = config.geom;
        const PlacedDataset off_set = build_custom(
            src18, 18, config.n_test_per_class, g,
            [&](int cls, Rng& rng) {
                const RegionRect area = grid.grid9_area(grid.grid9_area_of(cls));
                for (;;) {
                    const PositionTheta t{rng.uniform_int(g.min_center(), g.max_center()),
                                          rng.uniform_int(g.min_center(), g.max_center())};
                    if (!area.contains(t)) return t;
                }
            },
            derive_seed(s, 0x9A3));
        const PerClassAccuracy off = evaluate_per_class(model, off_set);

        out.metrics["own_area_acc_mean"] = mean_over(own.accuracy, all18);
        out.metrics["own_area_acc_min"] =
            *std::min_element(own.accuracy.begin(), own.accuracy.end());
        out.metrics["off_area_acc_mean"] = mean_over(off.accuracy, all18);
        out.metrics["off_area_acc_max"] =
            *std::max_element(off.accuracy.begin(), off.accuracy.end());
        out.metrics["translated_acc"] = evaluate(
            model, build_split(src18, uniform, config.n_test_per_class, derive_seed(s, 0x9A4)));

        if (!config.finetune_task.samples.empty()) {
            const PlacedDataset ft_onloc = build_split(config.finetune_task, one_loc,
                                                       config.n_train_per_class, derive_seed(s, 0x9A5));
            const TrainLog flg =
                train(model, ft_onloc, with_train_seed(config.finetune_cfg, derive_seed(s, 0x502)));
            out.logs.emplace_back("finetune", flg);
            out.metrics["finetune_train_acc"] = flg.final_accuracy;
            out.metrics["finetune_translated_acc"] = evaluate(
                model, build_split(config.finetune_task, uniform, config.n_test_per_class,
                                   derive_seed(s, 0x9A6)));
            store(sink, out, "e3-finetuned", s, model);
        }
        rec.outcomes.push_back(std::move(out));
    }
    return rec;
}

RunRecord run_experiment4(const E4Config& config, const ModelSink& sink) {
    RunRecord rec;
    rec.experiment_id = "E4." + std::to_string(config.condition);
    rec.arch = family_name(config.arch.family);
    const int K = config.arch.n_classes;
    if (config.source.n_classes != K)
        throw ConfigError("experiment 4 source classes must match the model head");
    const PlacementPolicy policy = PlacementPolicy::make_quadrant(
        config.geom, config.condition, K, config.translated_count);
    const PlacementPolicy uniform = PlacementPolicy::fully_translated(config.geom);
    const RegionRect quad = upper_right_quadrant(config.geom);

    std::vector<int> restricted, roaming;
    for (int c = 0; c < K; ++c)
        (policy.class_in_quadrant(c) ? restricted : roaming).push_back(c);

    for (std::uint64_t s : config.seeds) {
        SeedOutcome out;
        out.seed = s;
        out.metrics["chance"] = 1.0 / K;
        const PlacedDataset train_set =
            build_split(config.source, policy, config.n_train_per_class, derive_seed(s, 0xAA1));

        Model model(with_seed(config.arch, derive_seed(s, 0x600)));
        const TrainLog lg =
            train(model, train_set, with_train_seed(config.train_cfg, derive_seed(s, 0x601)));
        out.logs.emplace_back("quadrant", lg);
        out.metrics["train_acc"] = lg.final_accuracy;
        store(sink, out, "e4-c" + std::to_string(config.condition), s, model);

        const Geometry g = config.geom;
        const PlacedDataset on_q = build_custom(
            config.source, K, config.n_test_per_class, g,
            [&](int, Rng& rng) { return sample_inside_rect(quad, g, rng); }, derive_seed(s, 0xAA2));
        const PlacedDataset off_q = build_custom(
            config.source, K, config.n_test_per_class, g,
            [&](int, Rng& rng) { return sample_avoiding_rect(quad, g, rng); },
            derive_seed(s, 0xAA3));
        const PerClassAccuracy on_pc = evaluate_per_class(model, on_q);
        const PerClassAccuracy off_pc = evaluate_per_class(model, off_q);

        std::vector<int> all(static_cast<std::size_t>(K));
        for (int c = 0; c < K; ++c) all[static_cast<std::size_t>(c)] = c;
        out.metrics["quadrant_acc"] = mean_over(on_pc.accuracy, all);
        out.metrics["trained_area_acc"] = mean_over(off_pc.accuracy, roaming);
        if (!restricted.empty()) {
            out.metrics["restricted_on_quadrant_acc"] = mean_over(on_pc.accuracy, restricted);
            out.metrics["restricted_off_quadrant_acc"] = mean_over(off_pc.accuracy, restricted);
            double worst = 0;
            for (int c : restricted)
                worst = std::max(worst, off_pc.accuracy[static_cast<std::size_t>(c)]);
            out.metrics["restricted_off_quadrant_acc_max"] = worst;
        }
        out.metrics["translated_acc"] = evaluate(
            model, build_split(config.source, uniform, config.n_test_per_class,
                               derive_seed(s, 0xAA4)));
        rec.outcomes.push_back(std::move(out));
    }
    return rec;
}

RunRecord invariance_stages(const StagesConfig& config, const ModelSink& sink) {
    RunRecord rec;
    rec.experiment_id = "stages";
    rec.arch = family_name(config.arch.family);
    const PlacementPolicy one_loc = PlacementPolicy::one_location(config.geom);
    const PlacementPolicy uniform = PlacementPolicy::fully_translated(config.geom);

    for (std::uint64_t s : config.seeds) {
        SeedOutcome out;
        out.seed = s;
        InvarianceProbeConfig probe;
        probe.base = config.geom.base_theta();
        probe.displacements = horizontal_sweep(config.geom);
        probe.R = config.probe_R;
        probe.N = config.probe_N;
        probe.seed = derive_seed(s, 0xF00);

        auto run_probe = [&](const char* stage, Model& m, const GlyphDataset& items) {
            const InvarianceResult r = invariance_profile(m, items, config.geom, probe);
            out.profiles.emplace_back(stage, r);
            out.metrics[std::string("stage_") + stage + "_I"] = r.mean_I;
        };

        Model a(with_seed(config.arch, derive_seed(s, 0x700)));
        run_probe("A", a, config.task);

        Model b(with_seed(config.arch, derive_seed(s, 0x701)));
        const PlacedDataset onloc =
            build_split(config.task, one_loc, config.n_train_per_class, derive_seed(s, 0xFA1));
        const TrainLog blg =
            train(b, onloc, with_train_seed(config.train_cfg, derive_seed(s, 0x702)));
        out.logs.emplace_back("stage_B", blg);
        out.metrics["stage_B_train_acc"] = blg.final_accuracy;
        run_probe("B", b, config.task);

        Model d(with_seed(config.arch, derive_seed(s, 0x703)));
        const PlacedDataset rich_set =
            build_split(config.rich, uniform, config.n_rich_per_class, derive_seed(s, 0xFA2));
        const TrainLog dlg =
            train(d, rich_set, with_train_seed(config.train_cfg, derive_seed(s, 0x704)));
        out.logs.emplace_back("pretrain", dlg);
        out.metrics["pretrain_train_acc"] = dlg.final_accuracy;
        run_probe("C", d, config.rich);  // familiar items: the stand-in for ImageNet
        run_probe("D", d, config.task);  // novel items
        store(sink, out, "stages-pretrained", s, d);

        const TrainLog elg =
            train(d, onloc, with_train_seed(config.finetune_cfg, derive_seed(s, 0x705)));
        out.logs.emplace_back("stage_E", elg);
        out.metrics["stage_E_train_acc"] = elg.final_accuracy;
        run_probe("E", d, config.task);
        store(sink, out, "stages-finetuned", s, d);

        rec.outcomes.push_back(std::move(out));
    }
    return rec;
}

}  // namespace shiftlab

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "shiftlab/data/idx.hpp"
#include "shiftlab/harness/experiments.hpp"
#include "shiftlab/metric/invariance.hpp"
#include "shiftlab/report/checkpoint.hpp"
#include "shiftlab/report/heatmap.hpp"
#include "shiftlab/report/plan.hpp"
#include "shiftlab/report/report.hpp"
#include "shiftlab/version.hpp"

namespace fs = std::filesystem;
using namespace shiftlab;

namespace {

PlacementPolicy parse_policy(const std::string& name, const Geometry& geom) {
    if (name == "one-location") return PlacementPolicy::one_location(geom);
    if (name == "translated") return PlacementPolicy::fully_translated(geom);
    if (name == "grid9") return PlacementPolicy::make_grid9(geom);
    if (name.rfind("fixed:", 0) == 0) {
        const std::string rest = name.substr(6);
        const std::size_t comma = rest.find(',');
        if (comma == std::string::npos)
            throw ConfigError("fixed policy needs fixed:<cx>,<cy>, got '" + name + "'");
        return PlacementPolicy::make_fixed(
            geom, {std::stoi(rest.substr(0, comma)), std::stoi(rest.substr(comma + 1))});
    }
    throw ConfigError("unknown policy '" + name +
                      "' (expected one-location, translated, grid9 or fixed:<cx>,<cy>)");
}

struct TrainFlags {
    std::string data, policy = "one-location", eval_data, geometry = "desk";
    int per_class = 40;
    double lr = 0.001, target_acc = 0.95;
    int batch_size = 64, max_epochs = 100, sustain = 3;
    bool freeze_bn_stats = false, save_optimizer = false;
    std::uint64_t seed = 0;
    std::string out;
};

void add_train_flags(CLI::App& cmd, TrainFlags& f) {
    cmd.add_option("--data", f.data, "training dataset (synth:k=v,... or idx:images=...,labels=...)")
        ->required();
    cmd.add_option("--policy", f.policy, "placement policy (one-location|translated|grid9|fixed:x,y)");
    cmd.add_option("--per-class", f.per_class, "placed samples per class");
    cmd.add_option("--geometry", f.geometry, "canvas geometry (desk|paper)");
    cmd.add_option("--lr", f.lr, "Adam learning rate");
    cmd.add_option("--batch-size", f.batch_size, "minibatch size");
    cmd.add_option("--max-epochs", f.max_epochs, "epoch budget");
    cmd.add_option("--target-acc", f.target_acc, "accuracy that counts as converged");
    cmd.add_option("--sustain", f.sustain, "epochs the target must hold");
    cmd.add_flag("--freeze-bn-stats", f.freeze_bn_stats, "keep batch-norm running stats fixed");
    cmd.add_flag("--save-optimizer", f.save_optimizer, "include Adam state in the checkpoint");
    cmd.add_option("--eval-data", f.eval_data, "extra dataset evaluated fully-translated after training");
    cmd.add_option("--seed", f.seed, "training seed (shuffling; also model init for train)");
    cmd.add_option("--out", f.out, "checkpoint path to write")->required();
}

TrainConfig to_train_config(const TrainFlags& f) {
    TrainConfig cfg;
    cfg.adam.lr = static_cast<float>(f.lr);
    cfg.batch_size = f.batch_size;
    cfg.max_epochs = f.max_epochs;
    cfg.target_acc = f.target_acc;
    cfg.sustain = f.sustain;
    cfg.seed = f.seed;
    cfg.freeze_bn_stats = f.freeze_bn_stats;
    return cfg;
}

void print_log(const TrainLog& log) {
    for (const EpochLog& e : log.epochs)
        std::printf("epoch %3d  loss %.4f  acc %.4f\n", e.epoch, e.loss, e.accuracy);
    std::printf("%s at train accuracy %.4f\n", log.converged ? "converged" : "did not converge",
                log.final_accuracy);
}

void run_training(Model& model, const TrainFlags& f) {
    const Geometry geom = geometry_from_name(f.geometry);
    const GlyphDataset glyphs = materialize(parse_dataset_ref(f.data, "--data"));
    const PlacedDataset data =
        build_split(glyphs, parse_policy(f.policy, geom), f.per_class, derive_seed(f.seed, 0xDA7A));
    const TrainLog log = train(model, data, to_train_config(f));
    print_log(log);
    if (!f.eval_data.empty()) {
        const GlyphDataset eval_glyphs = materialize(parse_dataset_ref(f.eval_data, "--eval-data"));
        const PlacedDataset eval_set =
            build_split(eval_glyphs, PlacementPolicy::fully_translated(geom), f.per_class,
                        derive_seed(f.seed, 0xEBA7));
        std::printf("fully-translated eval accuracy %.4f\n", evaluate(model, eval_set));
    }
    save_checkpoint(model, f.out, f.save_optimizer);
    std::printf("checkpoint written to %s\n", f.out.c_str());
}

int run(int argc, char** argv) {
    CLI::App app{"shiftlab: a desk-scale laboratory for online translation invariance in CNNs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", engine_version());

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "generate a glyph dataset as an IDX pair");
    int sd_classes = 10, sd_per_class = 40;
    double sd_jitter = 0.5;
    std::uint64_t sd_seed = 0;
    std::string sd_out;
    synth->add_option("--classes", sd_classes, "number of classes");
    synth->add_option("--per-class", sd_per_class, "items per class");
    synth->add_option("--jitter", sd_jitter, "intra-class shape jitter in [0,1]");
    synth->add_option("--seed", sd_seed, "generator seed");
    synth->add_option("--out", sd_out, "output directory (writes images.idx + labels.idx)")
        ->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model from scratch");
    TrainFlags tf;
    std::string tr_arch = "plain";
    int tr_width_mult = 1;
    add_train_flags(*train_cmd, tf);
    train_cmd->add_option("--arch", tr_arch, "model family");
    train_cmd->add_option("--width-mult", tr_width_mult, "channel width multiplier");

    // finetune
    auto* finetune_cmd = app.add_subcommand("finetune", "continue training from a checkpoint");
    TrainFlags ff;
    std::string ft_from;
    add_train_flags(*finetune_cmd, ff);
    finetune_cmd->add_option("--from", ft_from, "checkpoint to start from")->required();

    // eval-density
    auto* density_cmd = app.add_subcommand("eval-density", "accuracy heatmap across the canvas");
    std::string ed_from, ed_data, ed_geometry = "desk", ed_out;
    int ed_grid = 19;
    bool ed_png = false;
    density_cmd->add_option("--from", ed_from, "checkpoint to evaluate")->required();
    density_cmd->add_option("--data", ed_data, "probe dataset (synth:... or idx:...)")->required();
    density_cmd->add_option("--grid", ed_grid, "grid resolution G (G x G probe centers)");
    density_cmd->add_option("--geometry", ed_geometry, "canvas geometry (desk|paper)");
    density_cmd->add_flag("--png", ed_png, "also write a PNG rendering");
    density_cmd->add_option("--out", ed_out, "output directory")->required();

    // invariance
    auto* inv_cmd = app.add_subcommand("invariance", "invariance profile along the horizontal sweep");
    std::string iv_from, iv_data, iv_layer, iv_geometry = "desk", iv_out;
    int iv_R = 40, iv_N = 200;
    std::uint64_t iv_seed = 0;
    inv_cmd->add_option("--from", iv_from, "checkpoint to probe")->required();
    inv_cmd->add_option("--data", iv_data, "item dataset (synth:... or idx:...)")->required();
    inv_cmd->add_option("--layer", iv_layer, "layer to probe (default: penultimate)");
    inv_cmd->add_option("--R", iv_R, "items for the translation term");
    inv_cmd->add_option("--N", iv_N, "cross-item pairs for the baseline");
    inv_cmd->add_option("--seed", iv_seed, "probe sampling seed");
    inv_cmd->add_option("--geometry", iv_geometry, "canvas geometry (desk|paper)");
    inv_cmd->add_option("--out", iv_out, "CSV path to write")->required();

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "run a full experiment plan");
    std::string ex_plan, ex_out;
    exp_cmd->add_option("plan", ex_plan, "plan file")->required()->check(CLI::ExistingFile);
    exp_cmd->add_option("--out", ex_out, "override the plan's output directory");

    // report
    auto* report_cmd = app.add_subcommand("report", "re-emit a bundle from saved run records");
    std::vector<std::string> rp_records;
    std::string rp_out;
    bool rp_png = false;
    report_cmd->add_option("records", rp_records, "run record JSON files")->required();
    report_cmd->add_flag("--png", rp_png, "also write PNG heatmaps");
    report_cmd->add_option("--out", rp_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (*synth) {
        const GlyphDataset data = synth_glyphs(sd_classes, sd_per_class, sd_jitter, sd_seed);
        fs::create_directories(sd_out);
        const std::string images = (fs::path(sd_out) / "images.idx").string();
        const std::string labels = (fs::path(sd_out) / "labels.idx").string();
        write_idx(data, images, labels);
        std::printf("wrote %zu items across %d classes to %s\n", data.samples.size(),
                    data.n_classes, sd_out.c_str());
    } else if (*train_cmd) {
        const Geometry geom = geometry_from_name(tf.geometry);
        const GlyphDataset glyphs = materialize(parse_dataset_ref(tf.data, "--data"));
        ArchSpec spec;
        spec.family = family_from_name(tr_arch);
        spec.canvas = geom.canvas;
        spec.n_classes = glyphs.n_classes;
        spec.width_mult = tr_width_mult;
        spec.seed = tf.seed;
        Model model(spec);
        run_training(model, tf);
    } else if (*finetune_cmd) {
        Model model = load_checkpoint(ft_from);
        run_training(model, ff);
    } else if (*density_cmd) {
        const Geometry geom = geometry_from_name(ed_geometry);
        Model model = load_checkpoint(ed_from);
        const GlyphDataset probe = materialize(parse_dataset_ref(ed_data, "--data"));
        const DensityGrid grid = density_map(model, probe, geom, ed_grid);
        fs::create_directories(ed_out);
        std::ofstream csv((fs::path(ed_out) / "density.csv").string(), std::ios::binary);
        csv << density_csv(grid);
        render_heatmap(grid, (fs::path(ed_out) / "density.pgm").string());
        if (ed_png) render_heatmap_png(grid, (fs::path(ed_out) / "density.png").string());
        std::printf("mean accuracy over %dx%d grid: %.4f\n", ed_grid, ed_grid, grid.mean());
    } else if (*inv_cmd) {
        const Geometry geom = geometry_from_name(iv_geometry);
        Model model = load_checkpoint(iv_from);
        const GlyphDataset items = materialize(parse_dataset_ref(iv_data, "--data"));
        InvarianceProbeConfig cfg;
        cfg.base = geom.base_theta();
        cfg.displacements = horizontal_sweep(geom);
        cfg.layer = iv_layer;
        cfg.R = iv_R;
        cfg.N = iv_N;
        cfg.seed = iv_seed;
        const InvarianceResult res = invariance_profile(model, items, geom, cfg);
        std::ofstream csv(iv_out, std::ios::binary);
        if (!csv) throw IoError("cannot write " + iv_out);
        csv << invariance_csv(res);
        std::printf("layer %s  mean I %.4f\n", res.layer.c_str(), res.mean_I);
    } else if (*exp_cmd) {
        const std::string text = [&] {
            std::ifstream in(ex_plan, std::ios::binary);
            std::ostringstream buffer;
            buffer << in.rdbuf();
            return buffer.str();
        }();
        ExperimentPlan plan = parse_plan(ex_plan);
        if (!ex_out.empty()) plan.out_dir = ex_out;
        fs::create_directories(fs::path(plan.out_dir) / "checkpoints");
        const ModelSink sink = [&](const std::string& tag, std::uint64_t seed, Model& model) {
            const std::string path =
                (fs::path(plan.out_dir) / "checkpoints" /
                 (tag + "-s" + std::to_string(seed) + ".shbc"))
                    .string();
            save_checkpoint(model, path);
            return path;
        };
        const RunRecord record = run_plan(plan, sink);
        save_record(record, (fs::path(plan.out_dir) / "record.json").string());
        const ReportBundle bundle =
            emit_report({record}, plan.out_dir, plan.png,
                        {{"plan_file", ex_plan}, {"plan_hash", std::to_string(plan_hash(text))}});
        std::printf("experiment %s finished; summary at %s\n", plan.experiment.c_str(),
                    bundle.summary_path.c_str());
    } else if (*report_cmd) {
        std::vector<RunRecord> records;
        records.reserve(rp_records.size());
        for (const std::string& path : rp_records) records.push_back(load_record(path));
        const ReportBundle bundle = emit_report(records, rp_out, rp_png, {});
        std::printf("report bundle at %s\n", bundle.summary_path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "shiftlab: %s\n", e.what());
        return 1;
    }
}

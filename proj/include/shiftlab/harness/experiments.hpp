#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "shiftlab/harness/train.hpp"
#include "shiftlab/metric/invariance.hpp"

namespace shiftlab {

/// Receives every trained model (tagged, per seed) so callers can persist
/// checkpoints; the returned path (may be empty) is recorded in the outcome.
using ModelSink =
    std::function<std::string(const std::string& tag, std::uint64_t seed, Model& model)>;

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;
    std::vector<std::pair<std::string, TrainLog>> logs;
    std::vector<std::pair<std::string, DensityGrid>> grids;
    std::vector<std::pair<std::string, InvarianceResult>> profiles;
    std::vector<std::pair<std::string, std::string>> checkpoints;
};

struct RunRecord {
    std::string experiment_id;
    std::string arch;
    std::vector<SeedOutcome> outcomes;
};

struct Aggregate {
    double mean = 0;
    double stddev = 0;  // sample standard deviation; 0 for a single seed
    int n = 0;
};

/// Mean/std per metric key across the record's seeds.
std::map<std::string, Aggregate> aggregate_runs(const RunRecord& record);

/// Experiment 1 — train at one location, test everywhere. The untrained arm
/// starts from scratch; the pretrained arm first learns a fully-translated
/// rich glyph set (`rich`, same class count, disjoint shapes) before the
/// one-location training.
struct E1Config {
    ArchSpec arch;
    Geometry geom = Geometry::desk();
    GlyphDataset task;
    GlyphDataset rich;  // empty samples -> untrained arm only
    TrainConfig train_cfg;
    int n_train_per_class = 40;
    int n_test_per_class = 20;
    int n_rich_per_class = 60;
    int n_probe_per_class = 0;  // 0 -> skip density maps
    int grid_G = 19;
    std::vector<std::uint64_t> seeds{1, 2, 3};
};
RunRecord run_experiment1(const E1Config& config, const ModelSink& sink = {});

/// Experiment 2 — pretrain fully-translated on `rich`, fine-tune at one
/// location on the disjoint `task`, test the task fully-translated. Also
/// trains a from-scratch control on the same one-location split.
struct E2Config {
    ArchSpec arch;
    Geometry geom = Geometry::desk();
    GlyphDataset rich;
    GlyphDataset task;
    TrainConfig pretrain_cfg;
    TrainConfig finetune_cfg;
    int n_rich_per_class = 80;
    int n_task_per_class = 40;
    int n_test_per_class = 20;
    bool with_control = true;
    std::vector<std::uint64_t> seeds{1, 2, 3};
};
RunRecord run_experiment2(const E2Config& config, const ModelSink& sink = {});

/// Experiment 3 — grid9 segregated pretraining on the first 18 classes of
/// `source`; tests each class inside its own area, outside it, and fully
/// translated. Optionally fine-tunes one-location on a fresh 18-class task.
struct E3Config {
    ArchSpec arch;  // n_classes must be 18
    Geometry geom = Geometry::desk();
    GlyphDataset source;         // >= 18 classes
    GlyphDataset finetune_task;  // empty samples -> skip the fine-tune arm
    TrainConfig train_cfg;
    TrainConfig finetune_cfg;
    int n_train_per_class = 30;
    int n_test_per_class = 15;
    std::vector<std::uint64_t> seeds{1, 2, 3};
};
RunRecord run_experiment3(const E3Config& config, const ModelSink& sink = {});

/// Experiment 4 — quadrant conditions. Condition 1 leaves the upper-right
/// quadrant empty during training; condition 2 confines the last 7 classes
/// to it; condition 3 fully translates the first `translated_count` classes
/// and confines the rest.
struct E4Config {
    ArchSpec arch;
    Geometry geom = Geometry::desk();
    GlyphDataset source;
    int condition = 1;
    int translated_count = 0;
    TrainConfig train_cfg;
    int n_train_per_class = 20;
    int n_test_per_class = 12;
    std::vector<std::uint64_t> seeds{1, 2, 3};
};
RunRecord run_experiment4(const E4Config& config, const ModelSink& sink = {});

/// The five-stage invariance analysis. A: untrained, probed on `task`.
/// B: one-location trained on `task`. C: fully-translated pretrained on
/// `rich`, probed on `rich` (a rich-glyph stand-in for the paper's
/// ImageNet stage). D: the same pretrained model probed on the novel
/// `task`. E: that model after a one-location fine-tune on `task`.
struct StagesConfig {
    ArchSpec arch;
    Geometry geom = Geometry::desk();
    GlyphDataset rich;
    GlyphDataset task;
    TrainConfig train_cfg;
    TrainConfig finetune_cfg;
    int n_train_per_class = 40;
    int n_rich_per_class = 60;
    int probe_R = 40;
    int probe_N = 200;
    std::vector<std::uint64_t> seeds{1, 2, 3};
};
RunRecord invariance_stages(const StagesConfig& config, const ModelSink& sink = {});

}  // namespace shiftlab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftlab/harness/experiments.hpp"

namespace shiftlab {

/// Where a plan's dataset comes from: the procedural generator or an IDX
/// image/label pair (paths resolved against SHIFTLAB_DATA_ROOT).
struct DatasetRef {
    enum class Kind { none, synth, idx };
    Kind kind = Kind::none;
    int classes = 0;
    int per_class = 0;
    double jitter = 0.5;
    std::uint64_t seed = 0;
    std::string images;
    std::string labels;

    bool present() const { return kind != Kind::none; }
};

GlyphDataset materialize(const DatasetRef& ref);

/// Parses one "synth:k=v,..." / "idx:k=v,..." dataset description — the same
/// notation the plan [data] section uses; `context` names the source in
/// rejection messages.
DatasetRef parse_dataset_ref(const std::string& value, const std::string& context = "dataset");

/// A validated experiment description parsed from a plan file. Field defaults
/// are the documented plan defaults; the echo of the effective plan lands in
/// the report bundle's provenance.
struct ExperimentPlan {
    std::string experiment;  // experiment1..experiment4 | stages
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string out_dir;
    bool png = false;

    Family family = Family::plain;
    int width_mult = 1;
    int classes = 10;
    Geometry geom = Geometry::desk();

    DatasetRef task, rich, source, finetune_task;
    int n_train_per_class = 40;
    int n_test_per_class = 20;
    int n_rich_per_class = 60;
    int n_task_per_class = 40;
    int n_probe_per_class = 0;
    int grid_G = 19;

    TrainConfig train_cfg;
    TrainConfig finetune_cfg;

    int condition = 1;         // experiment4
    int translated_count = 0;  // experiment4 condition 3
    int probe_R = 40;          // stages
    int probe_N = 200;         // stages

    ArchSpec arch(std::uint64_t seed) const;
};

/// Parses and validates the flat section/key format; every rejection names
/// the offending key and line.
ExperimentPlan parse_plan(const std::string& path);
ExperimentPlan parse_plan_text(const std::string& text, const std::string& name);

/// Stable FNV-1a hash of the plan text, recorded in provenance.
std::uint64_t plan_hash(const std::string& text);

/// Runs the plan's experiment across its seeds.
RunRecord run_plan(const ExperimentPlan& plan, const ModelSink& sink = {});

}  // namespace shiftlab

#include "shiftlab/report/plan.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "shiftlab/core/error.hpp"
#include "shiftlab/data/idx.hpp"

namespace shiftlab {

namespace {

struct Entry {
    std::string value;
    int line = 0;
};

using SectionMap = std::map<std::string, std::map<std::string, Entry>>;

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"plan", {"experiment", "seeds", "out", "png"}},
        {"arch", {"family", "width_mult", "classes", "geometry"}},
        {"data",
         {"task", "rich", "source", "finetune", "n_train_per_class", "n_test_per_class",
          "n_rich_per_class", "n_task_per_class", "n_probe_per_class", "grid"}},
        {"train", {"lr", "batch_size", "max_epochs", "target_acc", "sustain", "freeze_bn_stats"}},
        {"finetune", {"lr", "batch_size", "max_epochs", "target_acc", "sustain", "freeze_bn_stats"}},
        {"experiment4", {"condition", "translated_count"}},
        {"stages", {"probe_R", "probe_N"}},
    };
    return s;
}

[[noreturn]] void fail(const std::string& name, int line, const std::string& message) {
    throw ConfigError(name + ":" + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

SectionMap tokenize(const std::string& text, const std::string& name) {
    SectionMap sections;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(raw);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(name, line, "unterminated section header '" + s + "'");
            section = trim(s.substr(1, s.size() - 2));
            if (!schema().count(section))
                fail(name, line, "unknown section '" + section + "'");
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            fail(name, line, "expected 'key = value', got '" + s + "'");
        if (section.empty()) fail(name, line, "key outside any section");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!schema().at(section).count(key))
            fail(name, line, "unknown key '" + key + "' in section [" + section + "]");
        if (sections[section].count(key))
            fail(name, line, "duplicate key '" + key + "' in section [" + section + "]");
        if (value.empty()) fail(name, line, "key '" + key + "' has no value");
        sections[section][key] = {value, line};
    }
    return sections;
}

int to_int(const Entry& e, const std::string& name, const std::string& key) {
    int v = 0;
    const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
    if (res.ec != std::errc{} || res.ptr != e.value.data() + e.value.size())
        fail(name, e.line, "key '" + key + "' needs an integer, got '" + e.value + "'");
    return v;
}

double to_double(const Entry& e, const std::string& name, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        fail(name, e.line, "key '" + key + "' needs a number, got '" + e.value + "'");
    }
}

bool to_bool(const Entry& e, const std::string& name, const std::string& key) {
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    fail(name, e.line, "key '" + key + "' needs true or false, got '" + e.value + "'");
}

DatasetRef parse_dataset(const Entry& e, const std::string& name, const std::string& key) {
    DatasetRef ref;
    std::string rest;
    if (e.value.rfind("synth:", 0) == 0) {
        ref.kind = DatasetRef::Kind::synth;
        rest = e.value.substr(6);
    } else if (e.value.rfind("idx:", 0) == 0) {
        ref.kind = DatasetRef::Kind::idx;
        rest = e.value.substr(4);
    } else {
        fail(name, e.line, "dataset '" + key + "' must start with synth: or idx:");
    }
    std::istringstream parts(rest);
    std::string field;
    while (std::getline(parts, field, ',')) {
        const std::size_t eq = field.find('=');
        if (eq == std::string::npos)
            fail(name, e.line, "dataset field '" + field + "' is not k=v");
        const std::string k = trim(field.substr(0, eq));
        const Entry sub{trim(field.substr(eq + 1)), e.line};
        if (ref.kind == DatasetRef::Kind::synth) {
            if (k == "classes")
                ref.classes = to_int(sub, name, key + "." + k);
            else if (k == "per_class")
                ref.per_class = to_int(sub, name, key + "." + k);
            else if (k == "jitter")
                ref.jitter = to_double(sub, name, key + "." + k);
            else if (k == "seed")
                ref.seed = static_cast<std::uint64_t>(to_int(sub, name, key + "." + k));
            else
                fail(name, e.line, "unknown synth dataset field '" + k + "'");
        } else {
            if (k == "images")
                ref.images = sub.value;
            else if (k == "labels")
                ref.labels = sub.value;
            else
                fail(name, e.line, "unknown idx dataset field '" + k + "'");
        }
    }
    if (ref.kind == DatasetRef::Kind::synth && (ref.classes < 2 || ref.per_class < 1))
        fail(name, e.line, "synth dataset '" + key + "' needs classes >= 2 and per_class >= 1");
    if (ref.kind == DatasetRef::Kind::idx && (ref.images.empty() || ref.labels.empty()))
        fail(name, e.line, "idx dataset '" + key + "' needs images= and labels= paths");
    return ref;
}

std::vector<std::uint64_t> parse_seeds(const Entry& e, const std::string& name) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(e.value);
    std::string tok;
    while (in >> tok) {
        const Entry sub{tok, e.line};
        seeds.push_back(static_cast<std::uint64_t>(to_int(sub, name, "seeds")));
    }
    if (seeds.empty()) fail(name, e.line, "seeds needs at least one value");
    return seeds;
}

TrainConfig read_train(const std::map<std::string, Entry>& sec, const std::string& name,
                       TrainConfig base) {
    for (const auto& [key, entry] : sec) {
        if (key == "lr")
            base.adam.lr = static_cast<float>(to_double(entry, name, key));
        else if (key == "batch_size")
            base.batch_size = to_int(entry, name, key);
        else if (key == "max_epochs")
            base.max_epochs = to_int(entry, name, key);
        else if (key == "target_acc")
            base.target_acc = to_double(entry, name, key);
        else if (key == "sustain")
            base.sustain = to_int(entry, name, key);
        else if (key == "freeze_bn_stats")
            base.freeze_bn_stats = to_bool(entry, name, key);
    }
    return base;
}

int line_of(const SectionMap& sections, const std::string& section, const std::string& key) {
    const auto s = sections.find(section);
    if (s == sections.end()) return 0;
    const auto k = s->second.find(key);
    return k == s->second.end() ? 0 : k->second.line;
}

}  // namespace

DatasetRef parse_dataset_ref(const std::string& value, const std::string& context) {
    return parse_dataset(Entry{value, 1}, context, "data");
}

GlyphDataset materialize(const DatasetRef& ref) {
    switch (ref.kind) {
        case DatasetRef::Kind::synth:
            return synth_glyphs(ref.classes, ref.per_class, ref.jitter, ref.seed);
        case DatasetRef::Kind::idx:
            return load_idx(resolve_data_path(ref.images), resolve_data_path(ref.labels));
        case DatasetRef::Kind::none:
            break;
    }
    throw ConfigError("cannot materialize an absent dataset");
}

ArchSpec ExperimentPlan::arch(std::uint64_t seed) const {
    ArchSpec spec;
    spec.family = family;
    spec.canvas = geom.canvas;
    spec.n_classes = classes;
    spec.width_mult = width_mult;
    spec.seed = seed;
    return spec;
}

ExperimentPlan parse_plan_text(const std::string& text, const std::string& name) {
    const SectionMap sections = tokenize(text, name);
    ExperimentPlan plan;

    const auto section = [&](const char* s) -> const std::map<std::string, Entry>& {
        static const std::map<std::string, Entry> empty;
        const auto it = sections.find(s);
        return it == sections.end() ? empty : it->second;
    };
    const auto get = [&](const char* s, const char* k) -> const Entry* {
        const auto& sec = section(s);
        const auto it = sec.find(k);
        return it == sec.end() ? nullptr : &it->second;
    };

    const Entry* experiment = get("plan", "experiment");
    if (!experiment) fail(name, 1, "missing required key 'experiment' in section [plan]");
    plan.experiment = experiment->value;
    static const std::set<std::string> known_experiments = {"experiment1", "experiment2",
                                                           "experiment3", "experiment4", "stages"};
    if (!known_experiments.count(plan.experiment))
        fail(name, experiment->line, "unknown experiment '" + plan.experiment + "'");

    const Entry* out = get("plan", "out");
    if (!out) fail(name, 1, "missing required key 'out' in section [plan]");
    plan.out_dir = out->value;
    if (const Entry* e = get("plan", "seeds")) plan.seeds = parse_seeds(*e, name);
    if (const Entry* e = get("plan", "png")) plan.png = to_bool(*e, name, "png");

    if (const Entry* e = get("arch", "family")) {
        try {
            plan.family = family_from_name(e->value);
        } catch (const ConfigError& err) {
            fail(name, e->line, err.what());
        }
    }
    if (const Entry* e = get("arch", "width_mult")) plan.width_mult = to_int(*e, name, "width_mult");
    if (const Entry* e = get("arch", "classes")) plan.classes = to_int(*e, name, "classes");
    if (const Entry* e = get("arch", "geometry")) {
        if (e->value == "desk")
            plan.geom = Geometry::desk();
        else if (e->value == "paper")
            plan.geom = Geometry::paper_scale();
        else
            fail(name, e->line, "geometry must be desk or paper, got '" + e->value + "'");
    }

    if (const Entry* e = get("data", "task")) plan.task = parse_dataset(*e, name, "task");
    if (const Entry* e = get("data", "rich")) plan.rich = parse_dataset(*e, name, "rich");
    if (const Entry* e = get("data", "source")) plan.source = parse_dataset(*e, name, "source");
    if (const Entry* e = get("data", "finetune"))
        plan.finetune_task = parse_dataset(*e, name, "finetune");
    if (const Entry* e = get("data", "n_train_per_class"))
        plan.n_train_per_class = to_int(*e, name, "n_train_per_class");
    if (const Entry* e = get("data", "n_test_per_class"))
        plan.n_test_per_class = to_int(*e, name, "n_test_per_class");
    if (const Entry* e = get("data", "n_rich_per_class"))
        plan.n_rich_per_class = to_int(*e, name, "n_rich_per_class");
    if (const Entry* e = get("data", "n_task_per_class"))
        plan.n_task_per_class = to_int(*e, name, "n_task_per_class");
    if (const Entry* e = get("data", "n_probe_per_class"))
        plan.n_probe_per_class = to_int(*e, name, "n_probe_per_class");
    if (const Entry* e = get("data", "grid")) plan.grid_G = to_int(*e, name, "grid");

    plan.train_cfg = read_train(section("train"), name, TrainConfig{});
    plan.finetune_cfg = read_train(section("finetune"), name, plan.train_cfg);

    if (const Entry* e = get("experiment4", "condition")) plan.condition = to_int(*e, name, "condition");
    if (const Entry* e = get("experiment4", "translated_count"))
        plan.translated_count = to_int(*e, name, "translated_count");
    if (const Entry* e = get("stages", "probe_R")) plan.probe_R = to_int(*e, name, "probe_R");
    if (const Entry* e = get("stages", "probe_N")) plan.probe_N = to_int(*e, name, "probe_N");

    // cross-field validation, tied back to the most relevant line
    const auto require_dataset = [&](const DatasetRef& ref, const char* key) {
        if (!ref.present())
            fail(name, experiment->line,
                 "experiment '" + plan.experiment + "' needs a '" + std::string(key) +
                     "' dataset in section [data]");
    };
    if (plan.experiment == "experiment1") require_dataset(plan.task, "task");
    if (plan.experiment == "experiment2" || plan.experiment == "stages") {
        require_dataset(plan.task, "task");
        require_dataset(plan.rich, "rich");
    }
    if (plan.experiment == "experiment3" || plan.experiment == "experiment4")
        require_dataset(plan.source, "source");
    if (plan.experiment == "experiment3" && plan.classes != 18)
        fail(name, std::max(1, line_of(sections, "arch", "classes")),
             "experiment3 segregates 9 areas x 2 classes and needs exactly 18 classes, got " +
                 std::to_string(plan.classes));
    if (plan.experiment == "experiment4") {
        if (plan.condition < 1 || plan.condition > 3)
            fail(name, std::max(1, line_of(sections, "experiment4", "condition")),
                 "condition must be 1, 2 or 3");
        if (plan.condition == 3 &&
            (plan.translated_count < 1 || plan.translated_count >= plan.classes))
            fail(name, std::max(1, line_of(sections, "experiment4", "translated_count")),
                 "condition 3 needs 1 <= translated_count < classes");
    }
    if (plan.classes < 2)
        fail(name, std::max(1, line_of(sections, "arch", "classes")), "classes must be >= 2");
    if (plan.grid_G < 2)
        fail(name, std::max(1, line_of(sections, "data", "grid")), "grid must be >= 2");
    return plan;
}

ExperimentPlan parse_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open plan file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_plan_text(buffer.str(), path);
}

std::uint64_t plan_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

RunRecord run_plan(const ExperimentPlan& plan, const ModelSink& sink) {
    if (plan.experiment == "experiment1") {
        E1Config cfg;
        cfg.arch = plan.arch(0);
        cfg.geom = plan.geom;
        cfg.task = materialize(plan.task);
        if (plan.rich.present()) cfg.rich = materialize(plan.rich);
        cfg.train_cfg = plan.train_cfg;
        cfg.n_train_per_class = plan.n_train_per_class;
        cfg.n_test_per_class = plan.n_test_per_class;
        cfg.n_rich_per_class = plan.n_rich_per_class;
        cfg.n_probe_per_class = plan.n_probe_per_class;
        cfg.grid_G = plan.grid_G;
        cfg.seeds = plan.seeds;
        return run_experiment1(cfg, sink);
    }
    if (plan.experiment == "experiment2") {
        E2Config cfg;
        cfg.arch = plan.arch(0);
        cfg.geom = plan.geom;
        cfg.rich = materialize(plan.rich);
        cfg.task = materialize(plan.task);
        cfg.pretrain_cfg = plan.train_cfg;
        cfg.finetune_cfg = plan.finetune_cfg;
        cfg.n_rich_per_class = plan.n_rich_per_class;
        cfg.n_task_per_class = plan.n_task_per_class;
        cfg.n_test_per_class = plan.n_test_per_class;
        cfg.seeds = plan.seeds;
        return run_experiment2(cfg, sink);
    }
    if (plan.experiment == "experiment3") {
        E3Config cfg;
        cfg.arch = plan.arch(0);
        cfg.geom = plan.geom;
        cfg.source = materialize(plan.source);
        if (plan.finetune_task.present()) cfg.finetune_task = materialize(plan.finetune_task);
        cfg.train_cfg = plan.train_cfg;
        cfg.finetune_cfg = plan.finetune_cfg;
        cfg.n_train_per_class = plan.n_train_per_class;
        cfg.n_test_per_class = plan.n_test_per_class;
        cfg.seeds = plan.seeds;
        return run_experiment3(cfg, sink);
    }
    if (plan.experiment == "experiment4") {
        E4Config cfg;
        cfg.arch = plan.arch(0);
        cfg.geom = plan.geom;
        cfg.source = materialize(plan.source);
        cfg.condition = plan.condition;
        cfg.translated_count = plan.translated_count;
        cfg.train_cfg = plan.train_cfg;
        cfg.n_train_per_class = plan.n_train_per_class;
        cfg.n_test_per_class = plan.n_test_per_class;
        cfg.seeds = plan.seeds;
        return run_experiment4(cfg, sink);
    }
    StagesConfig cfg;
    cfg.arch = plan.arch(0);
    cfg.geom = plan.geom;
    cfg.rich = materialize(plan.rich);
    cfg.task = materialize(plan.task);
    cfg.train_cfg = plan.train_cfg;
    cfg.finetune_cfg = plan.finetune_cfg;
    cfg.n_train_per_class = plan.n_train_per_class;
    cfg.n_rich_per_class = plan.n_rich_per_class;
    cfg.probe_R = plan.probe_R;
    cfg.probe_N = plan.probe_N;
    cfg.seeds = plan.seeds;
    return invariance_stages(cfg, sink);
}

}  // namespace shiftlab

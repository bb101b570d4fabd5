#include "shiftlab/report/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "shiftlab/core/error.hpp"
#include "shiftlab/report/heatmap.hpp"
#include "shiftlab/version.hpp"

namespace shiftlab {

namespace {

using nlohmann::json;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write report file: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("short write while emitting report file: " + path);
}

Aggregate aggregate_values(const std::vector<double>& values) {
    Aggregate a;
    a.n = static_cast<int>(values.size());
    for (double v : values) a.mean += v;
    a.mean /= a.n;
    if (a.n > 1) {
        double ss = 0;
        for (double v : values) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / (a.n - 1));
    }
    return a;
}

json aggregate_json(const Aggregate& a) {
    return json{{"mean", a.mean}, {"stddev", a.stddev}, {"n", a.n}};
}

json log_json(const std::string& tag, const TrainLog& log) {
    json epochs = json::array();
    for (const EpochLog& e : log.epochs)
        epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
    return json{{"tag", tag},
                {"converged", log.converged},
                {"final_accuracy", log.final_accuracy},
                {"epochs", std::move(epochs)}};
}

TrainLog log_from_json(const json& j) {
    TrainLog log;
    log.converged = j.at("converged").get<bool>();
    log.final_accuracy = j.at("final_accuracy").get<double>();
    for (const json& e : j.at("epochs"))
        log.epochs.push_back({e.at("epoch").get<int>(), e.at("loss").get<double>(),
                              e.at("accuracy").get<double>()});
    return log;
}

json grid_json(const std::string& tag, const DensityGrid& grid) {
    return json{{"tag", tag},          {"G", grid.G},
                {"canvas", grid.geom.canvas}, {"item", grid.geom.item},
                {"probe_count", grid.probe_count}, {"xs", grid.xs},
                {"ys", grid.ys},       {"acc", grid.acc}};
}

DensityGrid grid_from_json(const json& j) {
    DensityGrid grid;
    grid.G = j.at("G").get<int>();
    grid.geom = Geometry{j.at("canvas").get<int>(), j.at("item").get<int>()};
    grid.probe_count = j.at("probe_count").get<int>();
    grid.xs = j.at("xs").get<std::vector<int>>();
    grid.ys = j.at("ys").get<std::vector<int>>();
    grid.acc = j.at("acc").get<std::vector<double>>();
    return grid;
}

json profile_json(const std::string& tag, const InvarianceResult& r) {
    json entries = json::array();
    for (const ThetaInvariance& e : r.entries)
        entries.push_back(
            {{"x", e.theta.cx}, {"y", e.theta.cy}, {"T", e.T}, {"U", e.U}, {"I", e.I}});
    return json{{"tag", tag},
                {"layer", r.layer},
                {"dataset_id", r.dataset_id},
                {"model_desc", r.model_desc},
                {"zero_vector_count", r.zero_vector_count},
                {"mean_I", r.mean_I},
                {"entries", std::move(entries)}};
}

InvarianceResult profile_from_json(const json& j) {
    InvarianceResult r;
    r.layer = j.at("layer").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.model_desc = j.at("model_desc").get<std::string>();
    r.zero_vector_count = j.at("zero_vector_count").get<int>();
    r.mean_I = j.at("mean_I").get<double>();
    for (const json& e : j.at("entries"))
        r.entries.push_back({PositionTheta{e.at("x").get<int>(), e.at("y").get<int>()},
                             e.at("T").get<double>(), e.at("U").get<double>(),
                             e.at("I").get<double>()});
    return r;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string csv_field(const std::string& raw) {
    if (raw.find_first_of(",\"\r\n") == std::string::npos) return raw;
    std::string quoted = "\"";
    for (char c : raw) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
    std::string row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) row += ',';
        row += csv_field(fields[i]);
    }
    return row + "\r\n";
}

std::string csv_number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string density_csv(const DensityGrid& grid) {
    std::string out = csv_row({"gy", "gx", "cy", "cx", "accuracy"});
    for (int gy = 0; gy < grid.G; ++gy)
        for (int gx = 0; gx < grid.G; ++gx) {
            const std::size_t i = static_cast<std::size_t>(gy) * grid.G + gx;
            out += csv_row({std::to_string(gy), std::to_string(gx), std::to_string(grid.ys[i]),
                            std::to_string(grid.xs[i]), csv_number(grid.acc[i])});
        }
    return out;
}

std::string invariance_csv(const InvarianceResult& result) {
    std::string out = csv_row({"theta_x", "theta_y", "T", "U", "I"});
    for (const ThetaInvariance& e : result.entries)
        out += csv_row({std::to_string(e.theta.cx), std::to_string(e.theta.cy), csv_number(e.T),
                        csv_number(e.U), csv_number(e.I)});
    return out;
}

std::string metrics_csv(const RunRecord& record) {
    std::string out = csv_row({"seed", "metric", "value"});
    for (const SeedOutcome& o : record.outcomes)
        for (const auto& [key, value] : o.metrics)
            out += csv_row({std::to_string(o.seed), key, csv_number(value)});
    return out;
}

ReportBundle emit_report(const std::vector<RunRecord>& records, const std::string& out_dir,
                         bool png, const std::map<std::string, std::string>& provenance) {
    if (records.empty()) throw ConfigError("report needs at least one run record");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    ReportBundle bundle;

    std::map<std::string, int> seen_ids;
    json summary_records = json::array();
    for (const RunRecord& record : records) {
        std::string prefix = record.experiment_id;
        const int repeat = seen_ids[prefix]++;
        if (repeat) prefix += "-" + std::to_string(repeat + 1);

        json entry;
        entry["experiment"] = record.experiment_id;
        entry["arch"] = record.arch;
        json seeds = json::array();
        for (const SeedOutcome& o : record.outcomes) seeds.push_back(o.seed);
        entry["seeds"] = std::move(seeds);

        json metrics;
        for (const auto& [key, agg] : aggregate_runs(record)) metrics[key] = aggregate_json(agg);
        entry["metrics"] = std::move(metrics);

        std::map<std::string, std::vector<double>> profile_means;
        for (const SeedOutcome& o : record.outcomes)
            for (const auto& [tag, profile] : o.profiles) profile_means[tag].push_back(profile.mean_I);
        json profiles;
        for (const auto& [tag, values] : profile_means)
            profiles[tag] = aggregate_json(aggregate_values(values));
        entry["profiles"] = std::move(profiles);

        std::vector<std::string> files;
        const std::string metrics_path = (fs::path(out_dir) / (prefix + "-metrics.csv")).string();
        write_text(metrics_path, metrics_csv(record));
        bundle.csv_paths.push_back(metrics_path);
        files.push_back(prefix + "-metrics.csv");

        for (const SeedOutcome& o : record.outcomes) {
            const std::string stem = prefix + "-s" + std::to_string(o.seed);
            for (const auto& [tag, grid] : o.grids) {
                const std::string base = stem + "-" + tag + "-density";
                const std::string csv_path = (fs::path(out_dir) / (base + ".csv")).string();
                write_text(csv_path, density_csv(grid));
                bundle.csv_paths.push_back(csv_path);
                files.push_back(base + ".csv");
                const std::string pgm_path = (fs::path(out_dir) / (base + ".pgm")).string();
                render_heatmap(grid, pgm_path);
                bundle.image_paths.push_back(pgm_path);
                files.push_back(base + ".pgm");
                if (png) {
                    const std::string png_path = (fs::path(out_dir) / (base + ".png")).string();
                    render_heatmap_png(grid, png_path);
                    bundle.image_paths.push_back(png_path);
                    files.push_back(base + ".png");
                }
            }
            for (const auto& [tag, profile] : o.profiles) {
                const std::string base = stem + "-" + tag + "-invariance.csv";
                const std::string csv_path = (fs::path(out_dir) / base).string();
                write_text(csv_path, invariance_csv(profile));
                bundle.csv_paths.push_back(csv_path);
                files.push_back(base);
            }
        }
        entry["files"] = files;
        summary_records.push_back(std::move(entry));
    }

    json summary;
    summary["records"] = std::move(summary_records);
    bundle.summary_path = (fs::path(out_dir) / "summary.json").string();
    write_text(bundle.summary_path, summary.dump(2) + "\n");

    json prov;
    prov["emitted_at"] = utc_now();
    prov["engine"] = engine_version();
    for (const auto& [key, value] : provenance) prov[key] = value;
    bundle.provenance_path = (fs::path(out_dir) / "provenance.json").string();
    write_text(bundle.provenance_path, prov.dump(2) + "\n");
    return bundle;
}

void save_record(const RunRecord& record, const std::string& path) {
    json j;
    j["experiment_id"] = record.experiment_id;
    j["arch"] = record.arch;
    json outcomes = json::array();
    for (const SeedOutcome& o : record.outcomes) {
        json jo;
        jo["seed"] = o.seed;
        jo["metrics"] = o.metrics;
        json logs = json::array();
        for (const auto& [tag, log] : o.logs) logs.push_back(log_json(tag, log));
        jo["logs"] = std::move(logs);
        json grids = json::array();
        for (const auto& [tag, grid] : o.grids) grids.push_back(grid_json(tag, grid));
        jo["grids"] = std::move(grids);
        json profiles = json::array();
        for (const auto& [tag, profile] : o.profiles) profiles.push_back(profile_json(tag, profile));
        jo["profiles"] = std::move(profiles);
        json checkpoints = json::array();
        for (const auto& [tag, file] : o.checkpoints)
            checkpoints.push_back({{"tag", tag}, {"path", file}});
        jo["checkpoints"] = std::move(checkpoints);
        outcomes.push_back(std::move(jo));
    }
    j["outcomes"] = std::move(outcomes);

    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    write_text(tmp.string(), j.dump(2) + "\n");
    fs::rename(tmp, target);
}

RunRecord load_record(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open record file: " + path);
    RunRecord record;
    try {
        const json j = json::parse(in);
        record.experiment_id = j.at("experiment_id").get<std::string>();
        record.arch = j.at("arch").get<std::string>();
        for (const json& jo : j.at("outcomes")) {
            SeedOutcome o;
            o.seed = jo.at("seed").get<std::uint64_t>();
            o.metrics = jo.at("metrics").get<std::map<std::string, double>>();
            for (const json& l : jo.at("logs"))
                o.logs.emplace_back(l.at("tag").get<std::string>(), log_from_json(l));
            for (const json& g : jo.at("grids"))
                o.grids.emplace_back(g.at("tag").get<std::string>(), grid_from_json(g));
            for (const json& p : jo.at("profiles"))
                o.profiles.emplace_back(p.at("tag").get<std::string>(), profile_from_json(p));
            for (const json& c : jo.at("checkpoints"))
                o.checkpoints.emplace_back(c.at("tag").get<std::string>(),
                                           c.at("path").get<std::string>());
            record.outcomes.push_back(std::move(o));
        }
    } catch (const json::exception& e) {
        throw IoError("malformed record file " + path + ": " + e.what());
    }
    return record;
}

}  // namespace shiftlab

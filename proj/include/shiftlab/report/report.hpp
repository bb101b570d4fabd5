#pragma once

#include <map>
#include <string>
#include <vector>

#include "shiftlab/harness/experiments.hpp"
#include "shiftlab/metric/invariance.hpp"

namespace shiftlab {

/// RFC-4180 style quoting: fields holding a comma, quote, CR or LF are
/// wrapped in quotes with inner quotes doubled; records end in CRLF.
std::string csv_field(const std::string& raw);
std::string csv_row(const std::vector<std::string>& fields);

/// Shortest decimal that round-trips the double, so reruns are byte-stable.
std::string csv_number(double v);

/// Header row plus one row per grid cell: gy,gx,cy,cx,accuracy.
std::string density_csv(const DensityGrid& grid);

/// Header row plus one row per displacement: theta_x,theta_y,T,U,I.
std::string invariance_csv(const InvarianceResult& result);

/// Long-format per-seed metric table: seed,metric,value.
std::string metrics_csv(const RunRecord& record);

struct ReportBundle {
    std::string summary_path;
    std::string provenance_path;
    std::vector<std::string> csv_paths;
    std::vector<std::string> image_paths;
};

/// Summary JSON, per-seed CSV tables, heatmap images and a provenance
/// side-file. Summary and CSVs are byte-identical across reruns on the same
/// records; everything volatile (timestamp, engine version, extra context)
/// stays in the provenance file.
ReportBundle emit_report(const std::vector<RunRecord>& records, const std::string& out_dir,
                         bool png = false,
                         const std::map<std::string, std::string>& provenance = {});

/// JSON persistence for run records so `experiment` output feeds `report`.
void save_record(const RunRecord& record, const std::string& path);
RunRecord load_record(const std::string& path);

}  // namespace shiftlab

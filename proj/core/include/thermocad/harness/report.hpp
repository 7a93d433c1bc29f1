#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "thermocad/harness/experiments.hpp"

namespace thermocad::harness {

/// metrics.csv rows in report order; failed runs keep their id with the
/// "failed" flag. Contains no timings, so equal seeds give equal bytes.
std::string metrics_csv(const RunReport& report);
std::string history_csv(const RunReport& report);
std::string size_study_csv(const RunReport& report);
std::string report_json(const RunReport& report);

/// Writes metrics.csv, history.csv and report.json, plus
/// size_study.csv for size studies. SVG charts are emitted only when at
/// least one run succeeded. Returns the files written.
std::vector<std::filesystem::path> render_report(const RunReport& report, const std::filesystem::path& out_dir);

}  // namespace thermocad::harness

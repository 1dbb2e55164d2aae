#pragma once

// Run artifacts: the per-epoch RunLog as CSV, a JSON summary with the
// evaluation metrics, and an SVG plot of the loss/accuracy curves.

#include <string>
#include <vector>

#include "frh/metrics.hpp"
#include "frh/trainer.hpp"

namespace frh {

void write_runlog_csv(const std::string& path, const RunLog& log);
// Structured errors name the missing column/field of a truncated log.
RunLog read_runlog_csv(const std::string& path);

struct ReportMetrics {
    double final_accuracy = 0;
    std::vector<double> per_class_accuracy;
    bool has_difficulty = false;
    DifficultySplit difficulty;
    std::vector<AmbiguousGroup> groups;
    bool has_fusion = false;
    double fused_accuracy = 0;
};

std::string report_json(const RunLog& log, const ReportMetrics& metrics);
std::string curves_svg(const RunLog& log);

// Writes <dir>/report.json, <dir>/curves.csv and <dir>/curves.svg.
void write_report(const RunLog& log, const ReportMetrics& metrics, const std::string& dir);

}  // namespace frh

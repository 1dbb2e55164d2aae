#include "frh/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace frh {
namespace {

const char* kColumns[] = {"epoch",      "lr",    "ce",        "cl1",      "cl2",
                          "cl3",        "cl4",   "weighted_cl", "total",
                          "train_acc",  "eval_acc", "skipped", "seconds"};
constexpr int kColumnCount = 13;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_runlog_csv(const std::string& path, const RunLog& log) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    for (int i = 0; i < kColumnCount; ++i) os << (i ? "," : "") << kColumns[i];
    os << "\n";
    for (const auto& e : log.epochs) {
        os << e.epoch << ',' << fmt(e.lr) << ',' << fmt(e.ce);
        for (double v : e.stage_cl) os << ',' << fmt(v);
        os << ',' << fmt(e.weighted_cl) << ',' << fmt(e.total) << ','
           << fmt(e.train_acc) << ',' << fmt(e.eval_acc) << ',' << e.skipped << ','
           << fmt(e.seconds) << "\n";
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

RunLog read_runlog_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("runlog: missing header row");
    {
        std::istringstream hs(line);
        std::string cell;
        for (int i = 0; i < kColumnCount; ++i) {
            if (!std::getline(hs, cell, ','))
                throw std::runtime_error(std::string("runlog: missing column '") +
                                         kColumns[i] + "' in header");
            if (cell != kColumns[i])
                throw std::runtime_error("runlog: expected column '" +
                                         std::string(kColumns[i]) + "', found '" + cell + "'");
        }
    }
    RunLog log;
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) < kColumnCount)
            throw std::runtime_error("runlog row " + std::to_string(row) +
                                     ": missing field '" + kColumns[cells.size()] + "'");
        EpochRecord e;
        try {
            e.epoch = std::stoi(cells[0]);
            e.lr = std::stod(cells[1]);
            e.ce = std::stod(cells[2]);
            for (int s = 0; s < 4; ++s)
                e.stage_cl[static_cast<std::size_t>(s)] =
                    std::stod(cells[static_cast<std::size_t>(3 + s)]);
            e.weighted_cl = std::stod(cells[7]);
            e.total = std::stod(cells[8]);
            e.train_acc = std::stod(cells[9]);
            e.eval_acc = std::stod(cells[10]);
            e.skipped = std::stol(cells[11]);
            e.seconds = std::stod(cells[12]);
        } catch (const std::exception&) {
            throw std::runtime_error("runlog row " + std::to_string(row) +
                                     ": malformed numeric field");
        }
        if (!log.epochs.empty() && e.epoch <= log.epochs.back().epoch)
            throw std::runtime_error("runlog row " + std::to_string(row) +
                                     ": non-monotone epoch index");
        if (e.eval_acc > log.best_eval_acc || log.best_epoch < 0) {
            log.best_eval_acc = e.eval_acc;
            log.best_epoch = e.epoch;
        }
        log.epochs.push_back(e);
    }
    return log;
}

std::string report_json(const RunLog& log, const ReportMetrics& metrics) {
    nlohmann::ordered_json j;
    j["epochs"] = log.epochs.size();
    j["final_train_accuracy"] = log.epochs.empty() ? 0.0 : log.epochs.back().train_acc;
    j["final_eval_accuracy"] = log.epochs.empty() ? 0.0 : log.epochs.back().eval_acc;
    j["final_accuracy"] = metrics.final_accuracy;
    j["best_eval_accuracy"] = log.best_eval_acc;
    j["best_epoch"] = log.best_epoch;
    j["per_class_accuracy"] = metrics.per_class_accuracy;
    if (metrics.has_difficulty) {
        nlohmann::ordered_json table = nlohmann::ordered_json::array();
        const char* names[3] = {"hard", "medium", "easy"};
        const double accs[3] = {metrics.difficulty.hard_acc, metrics.difficulty.medium_acc,
                                metrics.difficulty.easy_acc};
        const int counts[3] = {metrics.difficulty.hard_count,
                               metrics.difficulty.medium_count,
                               metrics.difficulty.easy_count};
        for (int i = 0; i < 3; ++i) {
            nlohmann::ordered_json row;
            row["level"] = names[i];
            row["classes"] = counts[i];
            row["mean_accuracy"] = accs[i];
            table.push_back(row);
        }
        j["difficulty"] = table;
        nlohmann::ordered_json levels = nlohmann::ordered_json::array();
        for (auto d : metrics.difficulty.level) levels.push_back(difficulty_to_string(d));
        j["difficulty_levels"] = levels;
    }
    if (!metrics.groups.empty()) {
        nlohmann::ordered_json groups = nlohmann::ordered_json::array();
        for (const auto& g : metrics.groups) {
            nlohmann::ordered_json row;
            row["anchor"] = g.anchor;
            row["confused"] = g.confused;
            row["group_accuracy"] = g.group_accuracy;
            row["degenerate"] = g.degenerate;
            groups.push_back(row);
        }
        j["ambiguous_groups"] = groups;
    }
    if (metrics.has_fusion) j["fused_accuracy"] = metrics.fused_accuracy;
    return j.dump(2) + "\n";
}

namespace {

// Map a series onto the plot box and emit an SVG polyline.
void polyline(std::ostringstream& os, const std::vector<double>& ys, double lo, double hi,
              const char* color, int width, int height, int margin) {
    if (ys.empty()) return;
    const double span = hi - lo > 0 ? hi - lo : 1.0;
    os << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double x =
            margin + (width - 2.0 * margin) *
                         (ys.size() == 1 ? 0.0
                                         : static_cast<double>(i) /
                                               static_cast<double>(ys.size() - 1));
        const double y = height - margin - (height - 2.0 * margin) * ((ys[i] - lo) / span);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
        os << buf;
    }
    os << "\"/>\n";
}

}  // namespace

std::string curves_svg(const RunLog& log) {
    const int w = 640, h = 360, m = 40;
    std::vector<double> total, train_acc, eval_acc;
    for (const auto& e : log.epochs) {
        total.push_back(e.total);
        train_acc.push_back(e.train_acc);
        eval_acc.push_back(e.eval_acc);
    }
    double lo = 0.0, hi = 1.0;
    for (double v : total) hi = std::max(hi, v);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
       << "  <rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n"
       << "  <rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w - 2 * m
       << "\" height=\"" << h - 2 * m << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    polyline(os, total, lo, hi, "#d62728", w, h, m);
    polyline(os, train_acc, 0.0, 1.0, "#1f77b4", w, h, m);
    polyline(os, eval_acc, 0.0, 1.0, "#2ca02c", w, h, m);
    os << "  <text x=\"" << m << "\" y=\"" << m - 10
       << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << "total loss (red), train accuracy (blue), eval accuracy (green)</text>\n"
       << "</svg>\n";
    return os.str();
}

void write_report(const RunLog& log, const ReportMetrics& metrics, const std::string& dir) {
    {
        std::ofstream os(dir + "/report.json");
        if (!os) throw std::runtime_error("cannot open for write: " + dir + "/report.json");
        os << report_json(log, metrics);
    }
    write_runlog_csv(dir + "/curves.csv", log);
    {
        std::ofstream os(dir + "/curves.svg");
        if (!os) throw std::runtime_error("cannot open for write: " + dir + "/curves.svg");
        os << curves_svg(log);
    }
}

}  // namespace frh

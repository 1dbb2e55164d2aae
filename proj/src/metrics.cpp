#include "frh/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace frh {

long ConfusionMatrix::row_total(int label) const {
    long s = 0;
    for (int j = 0; j < classes; ++j) s += at(label, j);
    return s;
}

long ConfusionMatrix::total() const {
    long s = 0;
    for (long v : counts) s += v;
    return s;
}

double ConfusionMatrix::accuracy() const {
    const long n = total();
    if (n == 0) return 0.0;
    long diag = 0;
    for (int j = 0; j < classes; ++j) diag += at(j, j);
    return static_cast<double>(diag) / static_cast<double>(n);
}

std::vector<double> ConfusionMatrix::per_class_accuracy() const {
    std::vector<double> acc(static_cast<std::size_t>(classes), -1.0);
    for (int j = 0; j < classes; ++j) {
        const long row = row_total(j);
        if (row > 0)
            acc[static_cast<std::size_t>(j)] =
                static_cast<double>(at(j, j)) / static_cast<double>(row);
    }
    return acc;
}

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& pred,
                          int classes) {
    if (labels.size() != pred.size())
        throw std::invalid_argument("confusion: label/prediction length mismatch");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes || pred[i] < 0 || pred[i] >= classes)
            throw std::invalid_argument("confusion: class index out of range");
        ++cm.at(labels[i], pred[i]);
    }
    return cm;
}

std::string difficulty_to_string(Difficulty d) {
    switch (d) {
        case Difficulty::kHard: return "hard";
        case Difficulty::kMedium: return "medium";
        default: return "easy";
    }
}

DifficultySplit difficulty_split(const std::vector<double>& reference_acc,
                                 const std::vector<double>& evaluated_acc) {
    if (reference_acc.size() != evaluated_acc.size())
        throw std::invalid_argument("difficulty_split: length mismatch");
    DifficultySplit out;
    double sums[3] = {0, 0, 0};
    int counts[3] = {0, 0, 0};
    for (std::size_t i = 0; i < reference_acc.size(); ++i) {
        Difficulty d;
        if (reference_acc[i] < 0.70)
            d = Difficulty::kHard;
        else if (reference_acc[i] > 0.90)
            d = Difficulty::kEasy;
        else
            d = Difficulty::kMedium;  // both boundaries band as medium
        out.level.push_back(d);
        const int b = static_cast<int>(d);
        sums[b] += evaluated_acc[i];
        ++counts[b];
    }
    out.hard_count = counts[0];
    out.medium_count = counts[1];
    out.easy_count = counts[2];
    if (counts[0] > 0) out.hard_acc = sums[0] / counts[0];
    if (counts[1] > 0) out.medium_acc = sums[1] / counts[1];
    if (counts[2] > 0) out.easy_acc = sums[2] / counts[2];
    return out;
}

std::vector<AmbiguousGroup> ambiguous_groups(const ConfusionMatrix& cm,
                                             const std::vector<int>& anchors) {
    const auto acc = cm.per_class_accuracy();
    std::vector<AmbiguousGroup> out;
    for (int anchor : anchors) {
        if (anchor < 0 || anchor >= cm.classes)
            throw std::invalid_argument("ambiguous_groups: anchor out of range");
        AmbiguousGroup g;
        g.anchor = anchor;
        std::vector<int> others;
        for (int j = 0; j < cm.classes; ++j)
            if (j != anchor && cm.at(anchor, j) > 0) others.push_back(j);
        std::stable_sort(others.begin(), others.end(), [&](int a, int b) {
            if (cm.at(anchor, a) != cm.at(anchor, b))
                return cm.at(anchor, a) > cm.at(anchor, b);
            return a < b;  // ties break toward the lower class index
        });
        if (others.size() > 3) others.resize(3);
        g.confused = others;
        g.degenerate = others.size() < 3;
        double sum = acc[static_cast<std::size_t>(anchor)] < 0
                         ? 0.0
                         : acc[static_cast<std::size_t>(anchor)];
        int n = 1;
        for (int j : g.confused) {
            if (acc[static_cast<std::size_t>(j)] >= 0) {
                sum += acc[static_cast<std::size_t>(j)];
                ++n;
            }
        }
        g.group_accuracy = sum / n;
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<double> fuse_streams(const std::vector<std::vector<double>>& scores,
                                 const std::vector<double>& weights, int n, int k) {
    if (scores.empty() || scores.size() != weights.size())
        throw std::invalid_argument("fuse_streams: stream/weight count mismatch");
    const std::size_t numel = static_cast<std::size_t>(n) * k;
    double wsum = 0;
    for (double w : weights) {
        if (w < 0) throw std::invalid_argument("fuse_streams: negative weight");
        wsum += w;
    }
    if (wsum <= 0) throw std::invalid_argument("fuse_streams: weights sum to zero");
    for (const auto& s : scores)
        if (s.size() != numel)
            throw std::invalid_argument("fuse_streams: score matrix size mismatch");
    std::vector<double> fused(numel, 0.0);
    for (std::size_t si = 0; si < scores.size(); ++si) {
        const double w = weights[si] / wsum;
        if (w == 0.0) continue;
        for (std::size_t i = 0; i < numel; ++i) fused[i] += w * scores[si][i];
    }
    return fused;
}

std::vector<int> argmax_rows(const std::vector<double>& scores, int n, int k) {
    std::vector<int> pred(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* row = scores.data() + static_cast<std::size_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        pred[static_cast<std::size_t>(i)] = best;
    }
    return pred;
}

namespace {

void write_csv_matrix(const std::string& path, const char* value_prefix,
                      const std::vector<double>& values, const std::vector<int>& labels,
                      int dim) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "label";
    for (int j = 0; j < dim; ++j) os << "," << value_prefix << j;
    os << "\n";
    char buf[32];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        os << labels[i];
        for (int j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof buf, "%.9g",
                          values[i * static_cast<std::size_t>(dim) +
                                 static_cast<std::size_t>(j)]);
            os << ',' << buf;
        }
        os << "\n";
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void export_embeddings(const std::string& path, const std::vector<double>& embeddings,
                       const std::vector<int>& labels, int dim) {
    write_csv_matrix(path, "e", embeddings, labels, dim);
}

void write_scores(const std::string& path, const std::vector<double>& scores,
                  const std::vector<int>& labels, int k) {
    write_csv_matrix(path, "s", scores, labels, k);
}

void read_scores(const std::string& path, std::vector<double>& scores,
                 std::vector<int>& labels, int& k) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty score file: " + path);
    k = static_cast<int>(std::count(line.begin(), line.end(), ','));
    scores.clear();
    labels.clear();
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ',')) break;
        labels.push_back(std::stoi(cell));
        int got = 0;
        while (std::getline(ls, cell, ',')) {
            scores.push_back(std::stod(cell));
            ++got;
        }
        if (got != k) throw std::runtime_error("ragged score row in: " + path);
    }
}

}  // namespace frh

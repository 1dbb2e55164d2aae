#pragma once

// Evaluation metrics: confusion matrix, per-class accuracy, difficulty
// splits against a reference run, ambiguous class groups mined from the
// confusion matrix, multi-stream score fusion and embedding export.

#include <string>
#include <vector>

namespace frh {

struct ConfusionMatrix {
    int classes = 0;
    std::vector<long> counts;  // classes x classes, rows = true label

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k)
        : classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}

    long& at(int label, int pred) {
        return counts[static_cast<std::size_t>(label) * classes + pred];
    }
    long at(int label, int pred) const {
        return counts[static_cast<std::size_t>(label) * classes + pred];
    }
    long row_total(int label) const;
    long total() const;
    double accuracy() const;
    // Per-class accuracy; a class with no samples reports -1 (undefined).
    std::vector<double> per_class_accuracy() const;
};

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& pred,
                          int classes);

// Reference-accuracy banding: Hard < 0.70, 0.70 <= Medium <= 0.90, Easy > 0.90.
enum class Difficulty { kHard, kMedium, kEasy };

std::string difficulty_to_string(Difficulty d);

struct DifficultySplit {
    std::vector<Difficulty> level;       // per class
    // Unweighted mean of the evaluated per-class accuracies in each band;
    // -1 when the band is empty.
    double hard_acc = -1, medium_acc = -1, easy_acc = -1;
    int hard_count = 0, medium_count = 0, easy_count = 0;
};

DifficultySplit difficulty_split(const std::vector<double>& reference_acc,
                                 const std::vector<double>& evaluated_acc);

// For each anchor class: the three classes it is most confused with (largest
// off-diagonal row counts, ties to the lower class index) and the unweighted
// mean per-class accuracy over the group. Groups with fewer than three
// nonzero confusions are flagged degenerate and keep only the nonzero ones.
struct AmbiguousGroup {
    int anchor = 0;
    std::vector<int> confused;
    double group_accuracy = 0;
    bool degenerate = false;
};

std::vector<AmbiguousGroup> ambiguous_groups(const ConfusionMatrix& cm,
                                             const std::vector<int>& anchors);

// Weighted sum of per-stream softmax score matrices (each N x K, rows are
// probability vectors). Weights are normalized to sum to one, so a single
// stream with any positive weight is returned unchanged.
std::vector<double> fuse_streams(const std::vector<std::vector<double>>& scores,
                                 const std::vector<double>& weights, int n, int k);

std::vector<int> argmax_rows(const std::vector<double>& scores, int n, int k);

// CSV with a label column and one column per embedding dimension, 9
// significant digits.
void export_embeddings(const std::string& path, const std::vector<double>& embeddings,
                       const std::vector<int>& labels, int dim);

// CSV score matrix (label column + per-class scores); used to save and later
// fuse per-stream evaluation outputs.
void write_scores(const std::string& path, const std::vector<double>& scores,
                  const std::vector<int>& labels, int k);
void read_scores(const std::string& path, std::vector<double>& scores,
                 std::vector<int>& labels, int& k);

}  // namespace frh

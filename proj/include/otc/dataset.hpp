#pragma once

#include <optional>
#include <vector>

#include "otc/matrix.hpp"

namespace otc {

// Feature vectors with true and observed (possibly corrupted) labels.
// class_counts tracks the observed labels.
struct Dataset {
    Matrix features;                  // N x d
    std::vector<int> true_labels;     // length N, values in [0, K)
    std::vector<int> observed_labels; // length N, values in [0, K)
    std::vector<int> class_counts;    // length K, counts of observed labels

    std::size_t size() const { return true_labels.size(); }
    int num_classes() const { return static_cast<int>(class_counts.size()); }
};

// Recompute class_counts from observed_labels.
std::vector<int> count_observed(const std::vector<int>& observed_labels, int K);

// Throws std::invalid_argument on any broken invariant (label range, count
// consistency, non-finite features).
void validate(const Dataset& ds);

struct DatasetStats {
    std::optional<double> realized_rho;   // absent when some class is empty
    double realized_gamma = 0.0;
    std::vector<double> per_class_noise;  // fraction mislabeled among observed class k
};

DatasetStats dataset_stats(const Dataset& ds);

}  // namespace otc

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "otc/dataset.hpp"
#include "otc/ssl.hpp"

namespace otc {

struct GroupScores {
    std::vector<int> classes;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;  // absent when the group holds no samples
};

// Head/medium/tail thirds of the classes ranked by observed count (ceil
// split, ties broken by class index).
struct GroupReport {
    GroupScores head;
    GroupScores medium;
    GroupScores tail;
};

// Class indices ranked by descending observed count, split into thirds.
std::array<std::vector<int>, 3> split_class_groups(const std::vector<int>& class_counts);

// Positive class = truly clean sample (observed == true); per-group metrics
// over samples whose observed class falls in the group.
GroupReport selection_f1(const std::vector<bool>& clean_mask, const Dataset& dataset);

struct PseudoAccuracyReport {
    double overall = 0.0;
    std::optional<double> model_sourced;
    std::optional<double> transport_sourced;
    std::optional<double> head;
    std::optional<double> medium;
    std::optional<double> tail;
    std::size_t kept = 0;
};

// Fraction of kept pseudo-labels matching the true labels, split by source
// tag and class group. Throws when nothing is kept.
PseudoAccuracyReport pseudo_label_accuracy(const PseudoLabelSet& pseudo,
                                           const std::vector<std::size_t>& sample_indices,
                                           const Dataset& dataset);

struct AblationReport {
    AblationToggles toggles;
    PipelineResult result;
};

// One pipeline variant under the given toggles; the CLI pairs several of
// these under a shared seed.
AblationReport ablation_run(const ExperimentConfig& config, const Dataset& train,
                            const Matrix& test_features, const std::vector<int>& test_labels,
                            const AblationToggles& toggles);

}  // namespace otc

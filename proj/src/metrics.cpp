#include "otc/metrics.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>

namespace otc {

std::array<std::vector<int>, 3> split_class_groups(const std::vector<int>& class_counts) {
    const int K = static_cast<int>(class_counts.size());
    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (class_counts[a] != class_counts[b]) return class_counts[a] > class_counts[b];
        return a < b;
    });
    const int head_n = (K + 2) / 3;
    const int medium_n = (K - head_n + 1) / 2;
    std::array<std::vector<int>, 3> groups;
    for (int r = 0; r < K; ++r) {
        const int g = r < head_n ? 0 : (r < head_n + medium_n ? 1 : 2);
        groups[g].push_back(order[r]);
    }
    return groups;
}

namespace {

GroupScores score_group(const std::vector<int>& classes, const std::vector<bool>& clean_mask,
                        const Dataset& ds) {
    GroupScores s;
    s.classes = classes;
    std::vector<bool> in_group(ds.num_classes(), false);
    for (int k : classes) in_group[k] = true;
    std::size_t tp = 0, fp = 0, fn = 0, total = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!in_group[ds.observed_labels[i]]) continue;
        ++total;
        const bool truly_clean = ds.observed_labels[i] == ds.true_labels[i];
        if (clean_mask[i] && truly_clean) ++tp;
        else if (clean_mask[i] && !truly_clean) ++fp;
        else if (!clean_mask[i] && truly_clean) ++fn;
    }
    if (total == 0) return s;  // empty group, metrics stay absent
    const double p = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    const double r = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    s.precision = p;
    s.recall = r;
    s.f1 = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    return s;
}

}  // namespace

GroupReport selection_f1(const std::vector<bool>& clean_mask, const Dataset& dataset) {
    if (clean_mask.size() != dataset.size()) {
        throw std::invalid_argument("selection_f1: mask length mismatch");
    }
    const auto groups = split_class_groups(dataset.class_counts);
    GroupReport rep;
    rep.head = score_group(groups[0], clean_mask, dataset);
    rep.medium = score_group(groups[1], clean_mask, dataset);
    rep.tail = score_group(groups[2], clean_mask, dataset);
    return rep;
}

PseudoAccuracyReport pseudo_label_accuracy(const PseudoLabelSet& pseudo,
                                           const std::vector<std::size_t>& sample_indices,
                                           const Dataset& dataset) {
    if (pseudo.labels.size() != sample_indices.size()) {
        throw std::invalid_argument("pseudo_label_accuracy: index length mismatch");
    }
    if (pseudo.kept_count() == 0) {
        throw std::invalid_argument("pseudo_label_accuracy: kept set is empty");
    }
    const auto groups = split_class_groups(dataset.class_counts);
    std::vector<int> group_of(dataset.num_classes(), 2);
    for (int g = 0; g < 3; ++g) {
        for (int k : groups[g]) group_of[k] = g;
    }

    std::size_t hits = 0;
    std::array<std::size_t, 2> src_total{0, 0}, src_hits{0, 0};
    std::array<std::size_t, 3> grp_total{0, 0, 0}, grp_hits{0, 0, 0};
    for (std::size_t t = 0; t < pseudo.labels.size(); ++t) {
        if (!pseudo.kept[t]) continue;
        const std::size_t i = sample_indices[t];
        const bool hit = pseudo.labels[t] == dataset.true_labels[i];
        const int s = pseudo.source[t] == PseudoSource::Model ? 0 : 1;
        const int g = group_of[dataset.true_labels[i]];
        ++src_total[s];
        ++grp_total[g];
        if (hit) {
            ++hits;
            ++src_hits[s];
            ++grp_hits[g];
        }
    }

    PseudoAccuracyReport rep;
    rep.kept = pseudo.kept_count();
    rep.overall = static_cast<double>(hits) / static_cast<double>(rep.kept);
    auto ratio = [](std::size_t h, std::size_t n) -> std::optional<double> {
        if (n == 0) return std::nullopt;
        return static_cast<double>(h) / static_cast<double>(n);
    };
    rep.model_sourced = ratio(src_hits[0], src_total[0]);
    rep.transport_sourced = ratio(src_hits[1], src_total[1]);
    rep.head = ratio(grp_hits[0], grp_total[0]);
    rep.medium = ratio(grp_hits[1], grp_total[1]);
    rep.tail = ratio(grp_hits[2], grp_total[2]);
    return rep;
}

AblationReport ablation_run(const ExperimentConfig& config, const Dataset& train,
                            const Matrix& test_features, const std::vector<int>& test_labels,
                            const AblationToggles& toggles) {
    AblationReport rep;
    rep.toggles = toggles;
    rep.result = run_pipeline(config, train, test_features, test_labels, toggles);
    return rep;
}

}  // namespace otc

#include "otc/dataset.hpp"

#include <algorithm>
#include <stdexcept>

namespace otc {

std::vector<int> count_observed(const std::vector<int>& observed_labels, int K) {
    std::vector<int> counts(K, 0);
    for (int y : observed_labels) {
        if (y < 0 || y >= K) throw std::invalid_argument("count_observed: label out of range");
        ++counts[y];
    }
    return counts;
}

void validate(const Dataset& ds) {
    const int K = ds.num_classes();
    const std::size_t N = ds.size();
    if (K < 1) throw std::invalid_argument("dataset: class_counts empty");
    if (ds.observed_labels.size() != N) {
        throw std::invalid_argument("dataset: label array length mismatch");
    }
    if (ds.features.rows() != N) {
        throw std::invalid_argument("dataset: feature row count != label count");
    }
    for (int y : ds.true_labels) {
        if (y < 0 || y >= K) throw std::invalid_argument("dataset: true label out of range");
    }
    const auto recount = count_observed(ds.observed_labels, K);
    if (recount != ds.class_counts) {
        throw std::invalid_argument("dataset: class_counts inconsistent with observed_labels");
    }
    if (!all_finite(ds.features)) throw std::invalid_argument("dataset: non-finite feature");
}

DatasetStats dataset_stats(const Dataset& ds) {
    if (ds.true_labels.size() != ds.observed_labels.size() || ds.true_labels.empty()) {
        throw std::invalid_argument("dataset_stats: needs both label arrays");
    }
    DatasetStats st;
    const int K = ds.num_classes();
    const auto [min_it, max_it] = std::minmax_element(ds.class_counts.begin(), ds.class_counts.end());
    if (*min_it > 0) {
        st.realized_rho = static_cast<double>(*max_it) / static_cast<double>(*min_it);
    }
    std::size_t flips = 0;
    std::vector<std::size_t> class_flips(K, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.observed_labels[i] != ds.true_labels[i]) {
            ++flips;
            ++class_flips[ds.observed_labels[i]];
        }
    }
    st.realized_gamma = static_cast<double>(flips) / static_cast<double>(ds.size());
    st.per_class_noise.resize(K, 0.0);
    for (int k = 0; k < K; ++k) {
        if (ds.class_counts[k] > 0) {
            st.per_class_noise[k] = static_cast<double>(class_flips[k]) / ds.class_counts[k];
        }
    }
    return st;
}

}  // namespace otc

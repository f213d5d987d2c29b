#pragma once

#include <vector>

#include "otc/dataset.hpp"
#include "otc/matrix.hpp"
#include "otc/rng.hpp"

namespace otc {

// Row-stochastic K x K matrix, values(i, j) = P(observed = j | true = i).
struct TransitionMatrix {
    Matrix values;
};

// Isotropic Gaussian class clusters standing in for learned embeddings.
struct ClusterSpec {
    Matrix means;       // K x d
    double stddev = 1.0;
    double separation = 1.0;  // minimum pairwise distance between means
};

// Per-class sample counts N_k = round(N / (K * rho^(k/(K-1)))), clamped to
// >= 1. Counts are non-increasing in k. Throws on rho < 1 or K < 2 or N < K.
std::vector<int> longtail_counts(int N, int K, double rho);

// Diagonal 1-gamma, off-diagonal counts[j]*gamma/(N-counts[i]). Throws when
// some row has N - counts[i] == 0 (single effective class) or gamma outside
// [0, 1).
TransitionMatrix transition_matrix(const std::vector<int>& counts, double gamma);

// Each observed label drawn independently from row T[true_label].
std::vector<int> corrupt_labels(const std::vector<int>& true_labels,
                                const TransitionMatrix& T, Rng& rng);

// Class means with pairwise distance >= separation: random orthonormal
// directions when d >= K, a regular polygon in the first two coordinates when
// 2 <= d < K, equally spaced points when d == 1.
ClusterSpec make_cluster_spec(int K, int dim, double separation, double stddev, Rng& rng);

// Sample counts[k] points from the isotropic Gaussian at means[k]; samples
// are grouped by class. observed_labels start equal to true_labels.
Dataset gaussian_dataset(const std::vector<int>& counts, const ClusterSpec& spec, Rng& rng);

}  // namespace otc

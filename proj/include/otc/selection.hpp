#pragma once

#include <optional>
#include <vector>

#include "otc/matrix.hpp"

namespace otc {

// Per-class confidence thresholds smoothed across epochs.
struct ThresholdState {
    std::vector<double> tau;  // length K, values in [0, 1]
    int epoch = 0;            // number of EMA updates applied
    double lambda_ema = 0.99;
};

// Per-class feature centroids with the number of contributing samples.
struct Centroids {
    Matrix values;             // K x d
    std::vector<int> support;  // length K

    bool present(int k) const { return support[k] > 0; }
};

// Two-component 1-D Gaussian mixture, components ordered low mean first.
struct Gmm1D {
    double mean[2] = {0.0, 0.0};
    double var[2] = {1.0, 1.0};
    double weight[2] = {0.5, 0.5};
    bool degenerate = false;  // all inputs equal; posterior_low is 1 everywhere
    int iters = 0;
    std::vector<double> loglik_trace;

    double posterior_low(double x) const;
};

struct CleanPartition {
    std::vector<bool> clean_mask;
    std::vector<double> clean_prob;
};

// Raw per-class thresholds: mean over samples observed in class k of the row
// maximum. Classes with no observed samples get an absent marker.
std::vector<std::optional<double>> class_thresholds(const Matrix& probs,
                                                    const std::vector<int>& observed_labels,
                                                    int K);

// Absent entries fall back to the global mean of the present ones.
std::vector<double> resolve_thresholds(const std::vector<std::optional<double>>& raw);

// tau_k(t) = lambda * tau_k(t-1) + (1 - lambda) * raw_k. The first update
// initializes tau to raw.
ThresholdState ema_update(const ThresholdState& state, const std::vector<double>& raw);

// Row k = mean probability vector over samples observed in class k; empty
// classes fall back to the uniform vector.
Matrix class_mean_probs(const Matrix& probs, const std::vector<int>& observed_labels, int K);

// w(x_i) = max(p_i[k]/max(p_i), pbar_k[k]/max(pbar_k)) with k the observed
// label; each row is scaled by its weight, so the argmax never moves and rows
// no longer sum to 1.
Matrix weight_probs(const Matrix& probs, const std::vector<int>& observed_labels,
                    const Matrix& class_means);

std::vector<double> row_weights(const Matrix& probs, const std::vector<int>& observed_labels,
                                const Matrix& class_means);

// Sample selected iff its weighted max exceeds tau of its observed class and
// its argmax equals the observed class.
std::vector<bool> seed_clean_mask(const Matrix& weighted, const ThresholdState& thresholds,
                                  const std::vector<int>& observed_labels);

// Mean of features over selected samples per observed class. Classes with no
// selected samples are flagged via support == 0.
Centroids compute_centroids(const Matrix& features, const std::vector<bool>& mask,
                            const std::vector<int>& observed_labels, int K);

// Backfill absent centroids: take the feature of the class's highest
// weighted-confidence sample; a class with no observed samples at all falls
// back to the normalized global feature mean.
void ensure_all_centroids(Centroids& centroids, const Matrix& features, const Matrix& weighted,
                          const std::vector<int>& observed_labels);

// N x K squared Euclidean distances; +inf marks absent centroids.
Matrix distances(const Matrix& features, const Centroids& centroids);

// EM fit on 1-D values. Log-likelihood is non-decreasing per iteration;
// identical inputs trigger the degenerate fallback.
Gmm1D fit_gmm1d(const std::vector<double>& values, int max_iters = 100, double tol = 1e-8);

// clean_prob = posterior of the low-mean component at the own-class distance;
// clean requires clean_prob >= 0.5 and the nearest centroid matching the
// observed class.
CleanPartition partition(const Matrix& features, const Centroids& centroids,
                         const std::vector<int>& observed_labels, const Gmm1D& gmm);

// Fixed global-threshold small-loss baseline: cleanliness score is the
// probability at the observed label, threshold is its global mean.
std::vector<bool> baseline_small_loss_mask(const Matrix& probs,
                                           const std::vector<int>& observed_labels);

// One selection refresh as used at the start of an SSL round.
struct SelectionResult {
    Matrix weighted;              // re-weighted probability values
    ThresholdState thresholds;    // EMA state after this refresh
    std::vector<bool> seed_mask;  // seed-clean samples feeding the centroids
    Centroids centroids;          // all K present after backfill
    Matrix dist;                  // N x K squared distances
    std::vector<double> own_distance;  // distance to the observed class centroid
    Gmm1D gmm;
    CleanPartition clean;
};

// Ablation switches: cdt false replaces per-class EMA thresholds with one
// global mean-confidence threshold; lcs false bypasses centroid/GMM
// cross-selection and thresholds the weighted max directly.
struct SelectionOptions {
    bool cdt = true;
    bool lcs = true;
};

SelectionResult refresh_selection(const Matrix& probs, const Matrix& norm_features,
                                  const std::vector<int>& observed_labels, int K,
                                  const ThresholdState& prev,
                                  const SelectionOptions& opts = {});

}  // namespace otc

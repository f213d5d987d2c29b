#include "otc/datagen.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace otc {

std::vector<int> longtail_counts(int N, int K, double rho) {
    if (K < 2) throw std::invalid_argument("longtail_counts: K must be >= 2");
    if (N < K) throw std::invalid_argument("longtail_counts: N must be >= K");
    if (rho < 1.0) throw std::invalid_argument("longtail_counts: rho must be >= 1");
    std::vector<int> counts(K);
    for (int k = 0; k < K; ++k) {
        const double raw = N / (K * std::pow(rho, static_cast<double>(k) / (K - 1)));
        counts[k] = std::max(1, static_cast<int>(std::floor(raw + 0.5)));  // round half up
    }
    return counts;
}

TransitionMatrix transition_matrix(const std::vector<int>& counts, double gamma) {
    if (gamma < 0.0 || gamma >= 1.0) {
        throw std::invalid_argument("transition_matrix: gamma must be in [0, 1)");
    }
    const int K = static_cast<int>(counts.size());
    const int N = std::accumulate(counts.begin(), counts.end(), 0);
    for (int c : counts) {
        if (c <= 0) throw std::invalid_argument("transition_matrix: counts must be positive");
        if (N - c == 0) throw std::invalid_argument("transition_matrix: single-class input");
    }
    TransitionMatrix T;
    T.values = Matrix(K, K);
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
            T.values(i, j) = (i == j) ? 1.0 - gamma
                                      : counts[j] * gamma / static_cast<double>(N - counts[i]);
        }
    }
    return T;
}

std::vector<int> corrupt_labels(const std::vector<int>& true_labels,
                                const TransitionMatrix& T, Rng& rng) {
    const int K = static_cast<int>(T.values.rows());
    std::vector<int> observed(true_labels.size());
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const auto row = T.values.row(true_labels[i]);
        const double u = rng.uniform();
        double cum = 0.0;
        int drawn = K - 1;  // absorbs residual rounding mass
        for (int j = 0; j < K; ++j) {
            cum += row[j];
            if (u < cum) {
                drawn = j;
                break;
            }
        }
        observed[i] = drawn;
    }
    return observed;
}

ClusterSpec make_cluster_spec(int K, int dim, double separation, double stddev, Rng& rng) {
    if (K < 1 || dim < 1) throw std::invalid_argument("make_cluster_spec: K and dim must be >= 1");
    if (separation <= 0.0) throw std::invalid_argument("make_cluster_spec: separation must be > 0");
    if (stddev < 0.0) throw std::invalid_argument("make_cluster_spec: stddev must be >= 0");

    ClusterSpec spec;
    spec.stddev = stddev;
    spec.separation = separation;
    spec.means = Matrix(K, dim);

    if (dim >= K) {
        // Gram-Schmidt on gaussian draws; orthonormal directions scaled so the
        // pairwise distance s*sqrt(2) equals the requested separation.
        Matrix basis(K, dim);
        for (int k = 0; k < K; ++k) {
            auto row = basis.row(k);
            for (double& x : row) x = rng.gaussian();
            for (int p = 0; p < k; ++p) {
                const double proj = dot(row, basis.row(p));
                auto prev = basis.row(p);
                for (int c = 0; c < dim; ++c) row[c] -= proj * prev[c];
            }
            const double n = l2_norm(row);
            if (n < 1e-12) throw std::runtime_error("make_cluster_spec: degenerate basis draw");
            for (double& x : row) x /= n;
        }
        const double scale = separation / std::numbers::sqrt2;
        for (int k = 0; k < K; ++k) {
            for (int c = 0; c < dim; ++c) spec.means(k, c) = scale * basis(k, c);
        }
    } else if (dim >= 2) {
        // Regular K-gon in the first two coordinates; adjacent chord length
        // equals the separation.
        const double radius = (K == 1) ? 0.0 : separation / (2.0 * std::sin(std::numbers::pi / K));
        for (int k = 0; k < K; ++k) {
            const double angle = 2.0 * std::numbers::pi * k / K;
            spec.means(k, 0) = radius * std::cos(angle);
            spec.means(k, 1) = radius * std::sin(angle);
        }
    } else {
        for (int k = 0; k < K; ++k) spec.means(k, 0) = separation * k;
    }
    return spec;
}

Dataset gaussian_dataset(const std::vector<int>& counts, const ClusterSpec& spec, Rng& rng) {
    const int K = static_cast<int>(counts.size());
    if (spec.means.rows() != static_cast<std::size_t>(K)) {
        throw std::invalid_argument("gaussian_dataset: counts/means size mismatch");
    }
    const std::size_t dim = spec.means.cols();
    const int N = std::accumulate(counts.begin(), counts.end(), 0);

    Dataset ds;
    ds.features = Matrix(N, dim);
    ds.true_labels.reserve(N);
    std::size_t row = 0;
    for (int k = 0; k < K; ++k) {
        const auto mean = spec.means.row(k);
        for (int n = 0; n < counts[k]; ++n, ++row) {
            auto f = ds.features.row(row);
            for (std::size_t c = 0; c < dim; ++c) f[c] = mean[c] + spec.stddev * rng.gaussian();
            ds.true_labels.push_back(k);
        }
    }
    ds.observed_labels = ds.true_labels;
    ds.class_counts = counts;
    validate(ds);
    return ds;
}

}  // namespace otc

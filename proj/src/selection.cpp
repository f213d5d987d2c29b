#include "otc/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace otc {

namespace {

constexpr double kVarFloor = 1e-6;

int row_argmax(std::span<const double> row) {
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

double gauss_log_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * 3.14159265358979323846 * var) + d * d / var);
}

}  // namespace

std::vector<std::optional<double>> class_thresholds(const Matrix& probs,
                                                    const std::vector<int>& observed_labels,
                                                    int K) {
    std::vector<double> sum(K, 0.0);
    std::vector<int> count(K, 0);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto row = probs.row(i);
        const double pmax = *std::max_element(row.begin(), row.end());
        sum[observed_labels[i]] += pmax;
        ++count[observed_labels[i]];
    }
    std::vector<std::optional<double>> tau(K);
    for (int k = 0; k < K; ++k) {
        if (count[k] > 0) tau[k] = sum[k] / count[k];
    }
    return tau;
}

std::vector<double> resolve_thresholds(const std::vector<std::optional<double>>& raw) {
    double sum = 0.0;
    int n = 0;
    for (const auto& t : raw) {
        if (t) {
            sum += *t;
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("resolve_thresholds: every class is empty");
    const double global_mean = sum / n;
    std::vector<double> out(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) out[k] = raw[k] ? *raw[k] : global_mean;
    return out;
}

ThresholdState ema_update(const ThresholdState& state, const std::vector<double>& raw) {
    ThresholdState next = state;
    next.epoch = state.epoch + 1;
    if (state.epoch == 0 || state.tau.empty()) {
        next.tau = raw;
        return next;
    }
    if (raw.size() != state.tau.size()) throw std::invalid_argument("ema_update: size mismatch");
    const double l = state.lambda_ema;
    for (std::size_t k = 0; k < raw.size(); ++k) {
        next.tau[k] = l * state.tau[k] + (1.0 - l) * raw[k];
    }
    return next;
}

Matrix class_mean_probs(const Matrix& probs, const std::vector<int>& observed_labels, int K) {
    Matrix means(K, probs.cols());
    std::vector<int> count(K, 0);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const int k = observed_labels[i];
        auto acc = means.row(k);
        const auto row = probs.row(i);
        for (std::size_t c = 0; c < probs.cols(); ++c) acc[c] += row[c];
        ++count[k];
    }
    for (int k = 0; k < K; ++k) {
        auto row = means.row(k);
        if (count[k] > 0) {
            for (double& x : row) x /= count[k];
        } else {
            std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(probs.cols()));
        }
    }
    return means;
}

std::vector<double> row_weights(const Matrix& probs, const std::vector<int>& observed_labels,
                                const Matrix& class_means) {
    std::vector<double> w(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const int k = observed_labels[i];
        const auto row = probs.row(i);
        const auto mean_row = class_means.row(k);
        const double row_max = std::max(*std::max_element(row.begin(), row.end()),
                                        std::numeric_limits<double>::min());
        const double mean_max = std::max(*std::max_element(mean_row.begin(), mean_row.end()),
                                         std::numeric_limits<double>::min());
        w[i] = std::max(row[k] / row_max, mean_row[k] / mean_max);
    }
    return w;
}

Matrix weight_probs(const Matrix& probs, const std::vector<int>& observed_labels,
                    const Matrix& class_means) {
    const auto w = row_weights(probs, observed_labels, class_means);
    Matrix out = probs;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (double& x : out.row(i)) x *= w[i];
    }
    return out;
}

std::vector<bool> seed_clean_mask(const Matrix& weighted, const ThresholdState& thresholds,
                                  const std::vector<int>& observed_labels) {
    std::vector<bool> mask(weighted.rows(), false);
    for (std::size_t i = 0; i < weighted.rows(); ++i) {
        const auto row = weighted.row(i);
        const int arg = row_argmax(row);
        mask[i] = row[arg] > thresholds.tau[observed_labels[i]] && arg == observed_labels[i];
    }
    return mask;
}

Centroids compute_centroids(const Matrix& features, const std::vector<bool>& mask,
                            const std::vector<int>& observed_labels, int K) {
    Centroids cent;
    cent.values = Matrix(K, features.cols());
    cent.support.assign(K, 0);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        if (!mask[i]) continue;
        const int k = observed_labels[i];
        auto acc = cent.values.row(k);
        const auto f = features.row(i);
        for (std::size_t c = 0; c < features.cols(); ++c) acc[c] += f[c];
        ++cent.support[k];
    }
    for (int k = 0; k < K; ++k) {
        if (cent.support[k] > 0) {
            for (double& x : cent.values.row(k)) x /= cent.support[k];
        }
    }
    return cent;
}

void ensure_all_centroids(Centroids& centroids, const Matrix& features, const Matrix& weighted,
                          const std::vector<int>& observed_labels) {
    const int K = static_cast<int>(centroids.support.size());
    for (int k = 0; k < K; ++k) {
        if (centroids.present(k)) continue;
        std::size_t best = features.rows();
        double best_conf = -1.0;
        for (std::size_t i = 0; i < features.rows(); ++i) {
            if (observed_labels[i] != k) continue;
            const auto row = weighted.row(i);
            const double conf = *std::max_element(row.begin(), row.end());
            if (conf > best_conf) {
                best_conf = conf;
                best = i;
            }
        }
        auto dst = centroids.values.row(k);
        if (best < features.rows()) {
            const auto src = features.row(best);
            std::copy(src.begin(), src.end(), dst.begin());
        } else {
            // No observed sample of this class at all; use the global mean direction.
            std::fill(dst.begin(), dst.end(), 0.0);
            for (std::size_t i = 0; i < features.rows(); ++i) {
                const auto f = features.row(i);
                for (std::size_t c = 0; c < features.cols(); ++c) dst[c] += f[c];
            }
            const double n = l2_norm(dst);
            if (n > 0.0) {
                for (double& x : dst) x /= n;
            }
        }
        centroids.support[k] = 1;
    }
}

Matrix distances(const Matrix& features, const Centroids& centroids) {
    const int K = static_cast<int>(centroids.support.size());
    Matrix d(features.rows(), K);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto f = features.row(i);
        for (int k = 0; k < K; ++k) {
            d(i, k) = centroids.present(k) ? squared_distance(centroids.values.row(k), f)
                                           : std::numeric_limits<double>::infinity();
        }
    }
    return d;
}

double Gmm1D::posterior_low(double x) const {
    if (degenerate) return 1.0;
    const double l0 = std::log(weight[0]) + gauss_log_pdf(x, mean[0], var[0]);
    const double l1 = std::log(weight[1]) + gauss_log_pdf(x, mean[1], var[1]);
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    return e0 / (e0 + e1);
}

Gmm1D fit_gmm1d(const std::vector<double>& values, int max_iters, double tol) {
    if (values.size() < 2) throw std::invalid_argument("fit_gmm1d: need at least 2 values");
    if (!all_finite(std::span<const double>(values.data(), values.size()))) {
        throw std::invalid_argument("fit_gmm1d: non-finite value");
    }
    Gmm1D g;
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    if (*mx_it - *mn_it < 1e-12) {
        g.degenerate = true;
        g.mean[0] = g.mean[1] = *mn_it;
        g.var[0] = g.var[1] = kVarFloor;
        return g;
    }

    // Initialize from the halves of the sorted values.
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = sorted.size() / 2;
    auto moments = [](std::span<const double> v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::pair{m, std::max(kVarFloor, s / static_cast<double>(v.size()))};
    };
    std::tie(g.mean[0], g.var[0]) = moments({sorted.data(), half});
    std::tie(g.mean[1], g.var[1]) = moments({sorted.data() + half, sorted.size() - half});

    const std::size_t n = values.size();
    std::vector<double> resp(n);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        // E step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l0 = std::log(std::max(g.weight[0], 1e-300)) +
                              gauss_log_pdf(values[i], g.mean[0], g.var[0]);
            const double l1 = std::log(std::max(g.weight[1], 1e-300)) +
                              gauss_log_pdf(values[i], g.mean[1], g.var[1]);
            const double m = std::max(l0, l1);
            const double e0 = std::exp(l0 - m);
            const double e1 = std::exp(l1 - m);
            resp[i] = e0 / (e0 + e1);
            ll += m + std::log(e0 + e1);
        }
        g.loglik_trace.push_back(ll);
        g.iters = it + 1;
        if (ll - prev_ll < tol && it > 0) break;
        prev_ll = ll;

        // M step
        double r0 = 0.0, s0 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            r0 += resp[i];
            s0 += resp[i] * values[i];
            s1 += (1.0 - resp[i]) * values[i];
        }
        const double r1 = static_cast<double>(n) - r0;
        if (r0 < 1e-10 || r1 < 1e-10) break;  // component collapsed
        g.mean[0] = s0 / r0;
        g.mean[1] = s1 / r1;
        double v0 = 0.0, v1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            v0 += resp[i] * (values[i] - g.mean[0]) * (values[i] - g.mean[0]);
            v1 += (1.0 - resp[i]) * (values[i] - g.mean[1]) * (values[i] - g.mean[1]);
        }
        g.var[0] = std::max(kVarFloor, v0 / r0);
        g.var[1] = std::max(kVarFloor, v1 / r1);
        g.weight[0] = r0 / static_cast<double>(n);
        g.weight[1] = r1 / static_cast<double>(n);
    }

    if (g.mean[0] > g.mean[1]) {
        std::swap(g.mean[0], g.mean[1]);
        std::swap(g.var[0], g.var[1]);
        std::swap(g.weight[0], g.weight[1]);
    }
    return g;
}

CleanPartition partition(const Matrix& features, const Centroids& centroids,
                         const std::vector<int>& observed_labels, const Gmm1D& gmm) {
    const Matrix d = distances(features, centroids);
    CleanPartition part;
    part.clean_prob.resize(features.rows());
    part.clean_mask.resize(features.rows());
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto row = d.row(i);
        const int nearest = static_cast<int>(std::min_element(row.begin(), row.end()) - row.begin());
        part.clean_prob[i] = gmm.posterior_low(row[observed_labels[i]]);
        part.clean_mask[i] = part.clean_prob[i] >= 0.5 && nearest == observed_labels[i];
    }
    return part;
}

std::vector<bool> baseline_small_loss_mask(const Matrix& probs,
                                           const std::vector<int>& observed_labels) {
    double mean = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) mean += probs(i, observed_labels[i]);
    mean /= static_cast<double>(probs.rows());
    std::vector<bool> mask(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        mask[i] = probs(i, observed_labels[i]) > mean;
    }
    return mask;
}

SelectionResult refresh_selection(const Matrix& probs, const Matrix& norm_features,
                                  const std::vector<int>& observed_labels, int K,
                                  const ThresholdState& prev, const SelectionOptions& opts) {
    SelectionResult res;
    const Matrix means = class_mean_probs(probs, observed_labels, K);
    res.weighted = weight_probs(probs, observed_labels, means);

    if (opts.cdt) {
        const auto raw = resolve_thresholds(class_thresholds(res.weighted, observed_labels, K));
        res.thresholds = ema_update(prev, raw);
    } else {
        // Global mean confidence, same threshold for every class, no EMA.
        double mean = 0.0;
        for (std::size_t i = 0; i < res.weighted.rows(); ++i) {
            const auto row = res.weighted.row(i);
            mean += *std::max_element(row.begin(), row.end());
        }
        mean /= static_cast<double>(res.weighted.rows());
        res.thresholds = prev;
        res.thresholds.tau.assign(K, mean);
        res.thresholds.epoch = prev.epoch + 1;
    }

    if (opts.lcs) {
        res.seed_mask = seed_clean_mask(res.weighted, res.thresholds, observed_labels);
        res.centroids = compute_centroids(norm_features, res.seed_mask, observed_labels, K);
        ensure_all_centroids(res.centroids, norm_features, res.weighted, observed_labels);
        res.dist = distances(norm_features, res.centroids);
        res.own_distance.resize(norm_features.rows());
        for (std::size_t i = 0; i < norm_features.rows(); ++i) {
            res.own_distance[i] = res.dist(i, observed_labels[i]);
        }
        res.gmm = fit_gmm1d(res.own_distance);
        res.clean = partition(norm_features, res.centroids, observed_labels, res.gmm);
    } else {
        // Time-varying unified threshold on the weighted max, no feature-space check.
        std::vector<std::optional<double>> raw_opt = class_thresholds(res.weighted, observed_labels, K);
        double global = 0.0;
        for (std::size_t i = 0; i < res.weighted.rows(); ++i) {
            const auto row = res.weighted.row(i);
            global += *std::max_element(row.begin(), row.end());
        }
        global /= static_cast<double>(res.weighted.rows());
        ThresholdState unified = prev;
        unified.tau.assign(K, global);
        unified.lambda_ema = prev.lambda_ema;
        if (prev.epoch > 0 && !prev.tau.empty()) {
            for (int k = 0; k < K; ++k) {
                unified.tau[k] = prev.lambda_ema * prev.tau[k] + (1.0 - prev.lambda_ema) * global;
            }
        }
        unified.epoch = prev.epoch + 1;
        res.thresholds = unified;
        res.seed_mask = std::vector<bool>(res.weighted.rows(), false);
        res.clean.clean_mask.resize(res.weighted.rows());
        res.clean.clean_prob.resize(res.weighted.rows());
        for (std::size_t i = 0; i < res.weighted.rows(); ++i) {
            const auto row = res.weighted.row(i);
            const double wmax = *std::max_element(row.begin(), row.end());
            const bool clean = wmax > unified.tau[observed_labels[i]];
            res.clean.clean_mask[i] = clean;
            res.clean.clean_prob[i] = clean ? 1.0 : 0.0;
        }
        // Transport still needs centroids; compute them from this clean set.
        res.centroids = compute_centroids(norm_features, res.clean.clean_mask, observed_labels, K);
        ensure_all_centroids(res.centroids, norm_features, res.weighted, observed_labels);
        res.dist = distances(norm_features, res.centroids);
        res.own_distance.resize(norm_features.rows());
        for (std::size_t i = 0; i < norm_features.rows(); ++i) {
            res.own_distance[i] = res.dist(i, observed_labels[i]);
        }
    }
    return res;
}

}  // namespace otc

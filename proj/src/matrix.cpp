#include "otc/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otc {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_finite(const Matrix& m) {
    return all_finite(std::span<const double>(m.data()));
}

Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        const double n = l2_norm(r);
        if (n > 0.0) {
            for (double& x : r) x /= n;
        }
    }
    return out;
}

void softmax_inplace(std::span<double> logits) {
    if (!all_finite(std::span<const double>(logits.data(), logits.size()))) {
        throw std::invalid_argument("softmax: non-finite logit");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& x : logits) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : logits) x /= sum;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    softmax_inplace(out);
    return out;
}

bool is_prob_matrix(const Matrix& m, double tol) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (double x : m.row(i)) {
            if (!(x >= 0.0 && x <= 1.0)) return false;
            sum += x;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

}  // namespace otc

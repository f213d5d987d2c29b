#include "otc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace otc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(std::span<const double> terms) {
    const double m = *std::max_element(terms.begin(), terms.end());
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

}  // namespace

Matrix cost_matrix(const Centroids& centroids, const Matrix& unlabeled_features) {
    const int K = static_cast<int>(centroids.support.size());
    for (int k = 0; k < K; ++k) {
        if (!centroids.present(k)) throw std::invalid_argument("cost_matrix: centroid absent");
    }
    if (centroids.values.cols() != unlabeled_features.cols()) {
        throw std::invalid_argument("cost_matrix: dimension mismatch");
    }
    Matrix C(K, unlabeled_features.rows());
    for (int k = 0; k < K; ++k) {
        const auto c = centroids.values.row(k);
        for (std::size_t j = 0; j < unlabeled_features.rows(); ++j) {
            C(k, j) = 1.0 - dot(c, unlabeled_features.row(j));
        }
    }
    return C;
}

SinkhornResult sinkhorn(const Matrix& C, const std::vector<double>& mu,
                        const std::vector<double>& nu, double eps, int max_iters, double tol) {
    if (eps <= 0.0) throw std::invalid_argument("sinkhorn: eps must be > 0");
    const std::size_t K = C.rows();
    const std::size_t M = C.cols();
    if (mu.size() != K || nu.size() != M) throw std::invalid_argument("sinkhorn: marginal size mismatch");

    std::vector<double> log_mu(K), log_nu(M);
    for (std::size_t i = 0; i < K; ++i) log_mu[i] = mu[i] > 0.0 ? std::log(mu[i]) : kNegInf;
    for (std::size_t j = 0; j < M; ++j) log_nu[j] = nu[j] > 0.0 ? std::log(nu[j]) : kNegInf;

    std::vector<double> f(K, 0.0), g(M, 0.0), terms(std::max(K, M));

    SinkhornResult res;
    res.plan.mu = mu;
    res.plan.nu = nu;

    auto compute_plan = [&]() {
        Matrix P(K, M);
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t j = 0; j < M; ++j) {
                const double e = (f[i] + g[j] - C(i, j)) / eps;
                P(i, j) = e == kNegInf ? 0.0 : std::exp(e);
            }
        }
        return P;
    };
    auto violations = [&](const Matrix& P) {
        double row_v = 0.0, col_v = 0.0;
        for (std::size_t i = 0; i < K; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < M; ++j) s += P(i, j);
            row_v += std::abs(s - mu[i]);
        }
        for (std::size_t j = 0; j < M; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < K; ++i) s += P(i, j);
            col_v += std::abs(s - nu[j]);
        }
        return std::pair{row_v, col_v};
    };

    for (int it = 0; it < max_iters; ++it) {
        for (std::size_t i = 0; i < K; ++i) {
            if (log_mu[i] == kNegInf) {
                f[i] = kNegInf;
                continue;
            }
            for (std::size_t j = 0; j < M; ++j) terms[j] = (g[j] - C(i, j)) / eps;
            f[i] = eps * (log_mu[i] - log_sum_exp({terms.data(), M}));
        }
        for (std::size_t j = 0; j < M; ++j) {
            if (log_nu[j] == kNegInf) {
                g[j] = kNegInf;
                continue;
            }
            for (std::size_t i = 0; i < K; ++i) terms[i] = (f[i] - C(i, j)) / eps;
            g[j] = eps * (log_nu[j] - log_sum_exp({terms.data(), K}));
        }
        res.iterations = it + 1;
        const Matrix P = compute_plan();
        const auto [row_v, col_v] = violations(P);
        if (std::max(row_v, col_v) <= tol) {
            res.plan.values = P;
            res.row_violation = row_v;
            res.col_violation = col_v;
            res.converged = true;
            return res;
        }
        if (it + 1 == max_iters) {
            res.plan.values = P;
            res.row_violation = row_v;
            res.col_violation = col_v;
        }
    }
    res.converged = false;
    return res;
}

namespace {

// Basic cell of the transportation simplex.
struct BasicCell {
    int i;
    int j;
    double alloc;
};

}  // namespace

TransportPlan exact_ot(const Matrix& C, const std::vector<double>& mu,
                       const std::vector<double>& nu) {
    const int K = static_cast<int>(C.rows());
    const int M = static_cast<int>(C.cols());
    if (static_cast<long>(K) * M > 10000) {
        throw std::invalid_argument("exact_ot: instance exceeds desk-scale guard K*M <= 1e4");
    }
    if (mu.size() != static_cast<std::size_t>(K) || nu.size() != static_cast<std::size_t>(M)) {
        throw std::invalid_argument("exact_ot: marginal size mismatch");
    }
    const double mass_mu = std::accumulate(mu.begin(), mu.end(), 0.0);
    const double mass_nu = std::accumulate(nu.begin(), nu.end(), 0.0);
    if (std::abs(mass_mu - mass_nu) > 1e-12) {
        throw std::invalid_argument("exact_ot: infeasible marginals (mass mismatch)");
    }

    // Northwest-corner initial basic solution: a monotone path of K+M-1 cells.
    std::vector<BasicCell> basic;
    basic.reserve(K + M - 1);
    {
        std::vector<double> mu_rem = mu, nu_rem = nu;
        int i = 0, j = 0;
        while (true) {
            const double a = std::min(mu_rem[i], nu_rem[j]);
            basic.push_back({i, j, a});
            mu_rem[i] -= a;
            nu_rem[j] -= a;
            if (i == K - 1 && j == M - 1) break;
            if (mu_rem[i] <= nu_rem[j] && i < K - 1) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    const double cost_scale = 1.0 + *std::max_element(C.data().begin(), C.data().end(),
                                                      [](double a, double b) {
                                                          return std::abs(a) < std::abs(b);
                                                      });
    const double enter_tol = 1e-12 * std::abs(cost_scale);

    const int nodes = K + M;  // rows then columns
    std::vector<std::vector<int>> adj(nodes);  // indices into basic
    auto rebuild_adj = [&]() {
        for (auto& a : adj) a.clear();
        for (int b = 0; b < static_cast<int>(basic.size()); ++b) {
            adj[basic[b].i].push_back(b);
            adj[K + basic[b].j].push_back(b);
        }
    };

    std::vector<double> u(K), v(M);
    std::vector<int> stack, parent_edge(nodes);
    std::vector<char> visited(nodes);

    auto solve_duals = [&]() {
        rebuild_adj();
        std::fill(visited.begin(), visited.end(), 0);
        u[0] = 0.0;
        visited[0] = 1;
        stack.assign(1, 0);
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            for (int b : adj[node]) {
                const auto& cell = basic[b];
                const int other = (node < K) ? K + cell.j : cell.i;
                if (visited[other]) continue;
                visited[other] = 1;
                if (other < K) {
                    u[other] = C(cell.i, cell.j) - v[cell.j];
                } else {
                    v[other - K] = C(cell.i, cell.j) - u[cell.i];
                }
                stack.push_back(other);
            }
        }
    };

    // Path between two tree nodes, returned as a list of basic-cell indices.
    auto tree_path = [&](int from, int to) {
        std::fill(visited.begin(), visited.end(), 0);
        std::fill(parent_edge.begin(), parent_edge.end(), -1);
        std::vector<int> q{from};
        visited[from] = 1;
        for (std::size_t qi = 0; qi < q.size(); ++qi) {
            const int node = q[qi];
            if (node == to) break;
            for (int b : adj[node]) {
                const auto& cell = basic[b];
                const int other = (node < K) ? K + cell.j : cell.i;
                if (visited[other]) continue;
                visited[other] = 1;
                parent_edge[other] = b;
                q.push_back(other);
            }
        }
        std::vector<int> path;
        int node = to;
        while (node != from) {
            const int b = parent_edge[node];
            path.push_back(b);
            node = (node < K) ? K + basic[b].j : basic[b].i;
        }
        return path;  // ordered from `to` back to `from`
    };

    const long max_pivots = 1000L + 200L * (K + M) * (K + M);
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
        solve_duals();

        // Bland's rule: smallest flat index with negative reduced cost.
        int enter_i = -1, enter_j = -1;
        for (int i = 0; i < K && enter_i < 0; ++i) {
            for (int j = 0; j < M; ++j) {
                if (C(i, j) - u[i] - v[j] < -enter_tol) {
                    bool is_basic = false;
                    for (const auto& cell : basic) {
                        if (cell.i == i && cell.j == j) {
                            is_basic = true;
                            break;
                        }
                    }
                    if (!is_basic) {
                        enter_i = i;
                        enter_j = j;
                        break;
                    }
                }
            }
        }
        if (enter_i < 0) break;  // optimal

        // Unique cycle: entering cell plus the tree path between its endpoints.
        const auto path = tree_path(enter_i, K + enter_j);
        // Signs alternate starting with + at the entering cell. Walking the
        // path from the column node back to the row node, the first edge gets -.
        double theta = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < path.size(); p += 2) {
            theta = std::min(theta, basic[path[p]].alloc);
        }
        // Bland again: among the minus cells hitting theta, leave the one with
        // the smallest flat index.
        int leave_pos = -1, leave_flat = std::numeric_limits<int>::max();
        for (std::size_t p = 0; p < path.size(); p += 2) {
            const auto& cell = basic[path[p]];
            const int flat = cell.i * M + cell.j;
            if (cell.alloc <= theta + 1e-15 && flat < leave_flat) {
                leave_flat = flat;
                leave_pos = static_cast<int>(p);
            }
        }
        for (std::size_t p = 0; p < path.size(); ++p) {
            basic[path[p]].alloc += (p % 2 == 0) ? -theta : theta;
        }
        basic[path[leave_pos]] = BasicCell{enter_i, enter_j, theta};
    }

    TransportPlan plan;
    plan.values = Matrix(K, M);
    plan.mu = mu;
    plan.nu = nu;
    for (const auto& cell : basic) {
        plan.values(cell.i, cell.j) = std::max(0.0, cell.alloc);
    }
    return plan;
}

double transport_cost(const TransportPlan& plan, const Matrix& C) {
    if (plan.values.rows() != C.rows() || plan.values.cols() != C.cols()) {
        throw std::invalid_argument("transport_cost: shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < C.data().size(); ++i) s += plan.values.data()[i] * C.data()[i];
    return s;
}

double consistency_loss(const TransportPlan& plan, const Matrix& strong_costs) {
    return transport_cost(plan, strong_costs);
}

OtLabels plan_to_labels(const TransportPlan& plan) {
    const std::size_t K = plan.values.rows();
    const std::size_t M = plan.values.cols();
    OtLabels out;
    out.labels.assign(M, -1);
    out.confidence.assign(M, 0.0);
    out.present.assign(M, false);
    for (std::size_t j = 0; j < M; ++j) {
        double col_mass = 0.0;
        double best = -1.0;
        int arg = -1;
        for (std::size_t k = 0; k < K; ++k) {
            const double x = plan.values(k, j);
            col_mass += x;
            if (x > best) {  // strict: ties stay at the lower class index
                best = x;
                arg = static_cast<int>(k);
            }
        }
        if (col_mass <= 0.0) continue;
        out.labels[j] = arg;
        out.confidence[j] = best / col_mass;
        out.present[j] = true;
    }
    return out;
}

std::vector<double> uniform_marginal(std::size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

}  // namespace otc

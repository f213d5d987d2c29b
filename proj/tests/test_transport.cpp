#include <stdexcept>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "otc/rng.hpp"
#include "otc/transport.hpp"
#include "support/ot_bruteforce.hpp"

using namespace otc;

namespace {

std::vector<double> random_marginal(std::size_t n, Rng& rng) {
    std::vector<double> m(n);
    double sum = 0.0;
    for (double& x : m) {
        x = 0.05 + rng.uniform();
        sum += x;
    }
    for (double& x : m) x /= sum;
    // renormalize exactly so that exact_ot's mass check passes
    const double total = std::accumulate(m.begin(), m.end(), 0.0);
    m.back() += 1.0 - total;
    return m;
}

Matrix random_cost(std::size_t K, std::size_t M, Rng& rng) {
    Matrix C(K, M);
    for (double& x : C.data()) x = rng.uniform();
    return C;
}

double plan_mass(const TransportPlan& p) {
    double s = 0.0;
    for (double x : p.values.data()) s += x;
    return s;
}

void check_feasible(const TransportPlan& p, double tol) {
    for (double x : p.values.data()) CHECK(x >= -1e-15);
    for (std::size_t i = 0; i < p.values.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < p.values.cols(); ++j) s += p.values(i, j);
        CHECK(std::abs(s - p.mu[i]) <= tol);
    }
    for (std::size_t j = 0; j < p.values.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.values.rows(); ++i) s += p.values(i, j);
        CHECK(std::abs(s - p.nu[j]) <= tol);
    }
    CHECK(plan_mass(p) == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("cost matrix: self, orthogonal, antipodal") {
    Centroids cent;
    cent.values = Matrix(2, 2);
    cent.values(0, 0) = 1.0;
    cent.values(1, 1) = 1.0;
    cent.support = {1, 1};
    Matrix f(3, 2);
    f(0, 0) = 1.0;   // same as centroid 0
    f(1, 1) = 1.0;   // orthogonal to centroid 0
    f(2, 0) = -1.0;  // antipodal to centroid 0
    const Matrix C = cost_matrix(cent, f);
    CHECK(C(0, 0) == doctest::Approx(0.0));
    CHECK(C(0, 1) == doctest::Approx(1.0));
    CHECK(C(0, 2) == doctest::Approx(2.0));
}

TEST_CASE("cost matrix requires every centroid") {
    Centroids cent;
    cent.values = Matrix(2, 2);
    cent.support = {1, 0};
    CHECK_THROWS_AS(cost_matrix(cent, Matrix(1, 2)), std::invalid_argument);
}

TEST_CASE("sinkhorn on a single cell returns [[1]]") {
    Matrix C(1, 1);
    C(0, 0) = 0.37;
    const auto res = sinkhorn(C, {1.0}, {1.0}, 0.1, 100, 1e-9);
    CHECK(res.converged);
    CHECK(res.plan.values(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sinkhorn with constant cost returns the outer product") {
    Rng r(3);
    const auto mu = random_marginal(4, r);
    const auto nu = random_marginal(6, r);
    Matrix C(4, 6, 0.7);
    const auto res = sinkhorn(C, mu, nu, 0.05, 2000, 1e-12);
    REQUIRE(res.converged);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(std::abs(res.plan.values(i, j) - mu[i] * nu[j]) <= 1e-9);
        }
    }
}

TEST_CASE("sinkhorn rejects eps <= 0") {
    Matrix C(1, 1);
    CHECK_THROWS_AS(sinkhorn(C, {1.0}, {1.0}, 0.0, 10, 1e-6), std::invalid_argument);
}

TEST_CASE("sinkhorn cost approaches exact cost at small eps") {
    Rng r(5);
    const Matrix C = random_cost(5, 8, r);
    const auto mu = random_marginal(5, r);
    const auto nu = random_marginal(8, r);
    const auto sink = sinkhorn(C, mu, nu, 1e-3, 200000, 1e-6);
    const auto exact = exact_ot(C, mu, nu);
    CHECK(std::max(sink.row_violation, sink.col_violation) <= 1e-6);
    CHECK(std::abs(transport_cost(sink.plan, C) - transport_cost(exact, C)) <= 1e-3);
}

TEST_CASE("sinkhorn plans satisfy the feasibility invariants") {
    Rng r(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t K = 2 + r.index(6);
        const std::size_t M = 2 + r.index(10);
        const Matrix C = random_cost(K, M, r);
        const auto res = sinkhorn(C, random_marginal(K, r), random_marginal(M, r), 0.05, 5000, 1e-8);
        REQUIRE(res.converged);
        check_feasible(res.plan, 1e-7);
    }
}

TEST_CASE("sinkhorn cost is non-increasing as eps decreases") {
    Rng r(9);
    const Matrix C = random_cost(6, 9, r);
    const auto mu = random_marginal(6, r);
    const auto nu = random_marginal(9, r);
    double prev = std::numeric_limits<double>::infinity();
    for (const double eps : {0.5, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        const auto res = sinkhorn(C, mu, nu, eps, 100000, 1e-9);
        const double cost = transport_cost(res.plan, C);
        CHECK(cost <= prev + 1e-6);
        prev = cost;
    }
}

TEST_CASE("exact_ot: diagonal optimum") {
    Matrix C(2, 2);
    C(0, 1) = 1.0;
    C(1, 0) = 1.0;
    const auto plan = exact_ot(C, {0.5, 0.5}, {0.5, 0.5});
    CHECK(plan.values(0, 0) == doctest::Approx(0.5));
    CHECK(plan.values(1, 1) == doctest::Approx(0.5));
    CHECK(transport_cost(plan, C) == doctest::Approx(0.0));
}

TEST_CASE("exact_ot: constant cost has cost 1") {
    Matrix C(2, 2, 1.0);
    const auto plan = exact_ot(C, {0.5, 0.5}, {0.5, 0.5});
    CHECK(transport_cost(plan, C) == doctest::Approx(1.0));
    check_feasible(plan, 1e-12);
}

TEST_CASE("exact_ot matches brute-force vertex enumeration on 4x4") {
    Rng r(11);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix C = random_cost(4, 4, r);
        const auto mu = random_marginal(4, r);
        const auto nu = random_marginal(4, r);
        const auto plan = exact_ot(C, mu, nu);
        check_feasible(plan, 1e-10);
        const double brute = testsupport::brute_force_ot_cost(C, mu, nu);
        CHECK(std::abs(transport_cost(plan, C) - brute) <= 1e-9);
    }
}

TEST_CASE("exact_ot rejects mass mismatch and oversized instances") {
    Matrix C(2, 2);
    CHECK_THROWS_AS(exact_ot(C, {0.6, 0.5}, {0.5, 0.5}), std::invalid_argument);
    Matrix big(101, 101);
    CHECK_THROWS_AS(exact_ot(big, std::vector<double>(101, 1.0 / 101),
                             std::vector<double>(101, 1.0 / 101)),
                    std::invalid_argument);
}

TEST_CASE("exact_ot basic solutions have at most K+M-1 nonzeros") {
    Rng r(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t K = 2 + r.index(5);
        const std::size_t M = 2 + r.index(7);
        const auto plan = exact_ot(random_cost(K, M, r), random_marginal(K, r),
                                   random_marginal(M, r));
        std::size_t nnz = 0;
        for (double x : plan.values.data()) {
            if (x > 1e-12) ++nnz;
        }
        CHECK(nnz <= K + M - 1);
    }
}

TEST_CASE("exact_ot recovers a planted matching") {
    Rng r(17);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + static_cast<int>(r.index(5));
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        r.shuffle(perm);
        Matrix C(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) C(i, j) = (j == perm[i]) ? 0.0 : 0.5 + r.uniform();
        }
        const auto uniform = uniform_marginal(n);
        const auto plan = exact_ot(C, uniform, uniform);
        for (int i = 0; i < n; ++i) {
            CHECK(plan.values(i, perm[i]) == doctest::Approx(1.0 / n).epsilon(1e-9));
        }
    }
}

TEST_CASE("scaling the cost leaves the exact plan and labels unchanged") {
    Rng r(19);
    const Matrix C = random_cost(4, 7, r);
    const auto mu = random_marginal(4, r);
    const auto nu = random_marginal(7, r);
    const auto base = exact_ot(C, mu, nu);
    const auto base_labels = plan_to_labels(base);
    for (const double scale : {0.5, 2.0, 10.0}) {
        Matrix Cs = C;
        for (double& x : Cs.data()) x *= scale;
        const auto scaled = exact_ot(Cs, mu, nu);
        for (std::size_t i = 0; i < C.data().size(); ++i) {
            CHECK(std::abs(scaled.values.data()[i] - base.values.data()[i]) <= 1e-9);
        }
        CHECK(plan_to_labels(scaled).labels == base_labels.labels);
    }
}

TEST_CASE("plan_to_labels: column mass and diagonal plan") {
    TransportPlan p;
    p.values = Matrix(3, 1);
    p.values(0, 0) = 0.9;
    p.values(1, 0) = 0.1;
    p.mu = {0.9, 0.1, 0.0};
    p.nu = {1.0};
    const auto labels = plan_to_labels(p);
    CHECK(labels.labels[0] == 0);
    CHECK(labels.confidence[0] == doctest::Approx(0.9));

    Matrix C(2, 2);
    C(0, 1) = 1.0;
    C(1, 0) = 1.0;
    const auto diag = exact_ot(C, {0.5, 0.5}, {0.5, 0.5});
    CHECK(plan_to_labels(diag).labels == std::vector<int>{0, 1});
}

TEST_CASE("plan_to_labels: all-zero column is excluded") {
    TransportPlan p;
    p.values = Matrix(2, 2);
    p.values(0, 0) = 1.0;
    p.mu = {1.0, 0.0};
    p.nu = {1.0, 0.0};
    const auto labels = plan_to_labels(p);
    CHECK(labels.present[0]);
    CHECK_FALSE(labels.present[1]);
    CHECK(labels.labels[1] == -1);
}

TEST_CASE("sample placed at a centroid takes that centroid's label") {
    Rng r(23);
    // 4 well-separated unit centroids in 4 dims
    Centroids cent;
    cent.values = Matrix(4, 4);
    for (int k = 0; k < 4; ++k) cent.values(k, k) = 1.0;
    cent.support = {1, 1, 1, 1};
    Matrix f(5, 4);
    for (std::size_t j = 0; j < 5; ++j) {
        for (int c = 0; c < 4; ++c) f(j, c) = r.gaussian();
    }
    // sample 2 sits exactly on centroid 3
    for (int c = 0; c < 4; ++c) f(2, c) = cent.values(3, c);
    const Matrix fn = l2_normalize_rows(f);
    const Matrix C = cost_matrix(cent, fn);
    const auto mu = uniform_marginal(4);
    const auto nu = uniform_marginal(5);
    const auto sink = sinkhorn(C, mu, nu, 0.01, 50000, 1e-9);
    REQUIRE(sink.converged);
    CHECK(plan_to_labels(sink.plan).labels[2] == 3);
    CHECK(plan_to_labels(exact_ot(C, mu, nu)).labels[2] == 3);
}

TEST_CASE("consistency loss: equal costs, zero costs, hand instance") {
    TransportPlan p;
    p.values = Matrix(2, 2);
    p.values(0, 0) = 0.3;
    p.values(0, 1) = 0.2;
    p.values(1, 0) = 0.1;
    p.values(1, 1) = 0.4;
    p.mu = {0.5, 0.5};
    p.nu = {0.4, 0.6};
    Matrix Cw(2, 2);
    Cw(0, 0) = 1.0;
    Cw(0, 1) = 2.0;
    Cw(1, 0) = 3.0;
    Cw(1, 1) = 4.0;
    CHECK(consistency_loss(p, Cw) ==
          doctest::Approx(0.3 * 1.0 + 0.2 * 2.0 + 0.1 * 3.0 + 0.4 * 4.0).epsilon(1e-15));
    CHECK(consistency_loss(p, Matrix(2, 2)) == 0.0);
}

TEST_CASE("consistency loss is linear in the cost and the plan") {
    Rng r(29);
    TransportPlan p;
    p.values = random_cost(3, 4, r);
    p.mu = uniform_marginal(3);
    p.nu = uniform_marginal(4);
    const Matrix A = random_cost(3, 4, r);
    const Matrix B = random_cost(3, 4, r);
    Matrix AB(3, 4);
    for (std::size_t i = 0; i < AB.data().size(); ++i) {
        AB.data()[i] = 2.0 * A.data()[i] + 3.0 * B.data()[i];
    }
    CHECK(consistency_loss(p, AB) ==
          doctest::Approx(2.0 * consistency_loss(p, A) + 3.0 * consistency_loss(p, B))
              .epsilon(1e-12));
}

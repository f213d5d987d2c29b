#pragma once

#include <vector>

#include "otc/matrix.hpp"
#include "otc/selection.hpp"

namespace otc {

// Nonnegative K x M coupling with source marginal mu (rows) and target
// marginal nu (columns).
struct TransportPlan {
    Matrix values;
    std::vector<double> mu;
    std::vector<double> nu;
};

// Cost entry (k, j) = 1 - dot(centroid_k, f_j). With unit-norm inputs the
// entries lie in [0, 2]. Throws unless all K centroids are present.
Matrix cost_matrix(const Centroids& centroids, const Matrix& unlabeled_features);

struct SinkhornResult {
    TransportPlan plan;
    int iterations = 0;
    double row_violation = 0.0;  // L1 distance of row sums to mu
    double col_violation = 0.0;
    bool converged = false;
};

// Entropic OT via log-domain Sinkhorn scaling, stable for small eps.
// Marginals must be nonnegative and sum to 1 each. Non-convergence returns
// the best plan with converged == false.
SinkhornResult sinkhorn(const Matrix& C, const std::vector<double>& mu,
                        const std::vector<double>& nu, double eps, int max_iters, double tol);

// Exact minimizer of <plan, C> via the transportation simplex with Bland's
// anti-cycling rule. Desk-scale guard K*M <= 10^4; marginal mass mismatch
// beyond 1e-12 is rejected.
TransportPlan exact_ot(const Matrix& C, const std::vector<double>& mu,
                       const std::vector<double>& nu);

double transport_cost(const TransportPlan& plan, const Matrix& C);

// L_sw: Frobenius inner product of the weak-view plan with strong-view costs.
double consistency_loss(const TransportPlan& plan, const Matrix& strong_costs);

struct OtLabels {
    std::vector<int> labels;        // -1 when the column carries no mass
    std::vector<double> confidence; // mass fraction of the argmax class
    std::vector<bool> present;
};

// Column argmax of the plan; ties break toward the lower class index.
OtLabels plan_to_labels(const TransportPlan& plan);

std::vector<double> uniform_marginal(std::size_t n);

}  // namespace otc

#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "otc/datagen.hpp"
#include "otc/ssl.hpp"
#include "support/oracles.hpp"

using namespace otc;

namespace {

Matrix unit_rows(std::size_t n, std::size_t d, Rng& rng) {
    Matrix m(n, d);
    for (double& x : m.data()) x = rng.gaussian();
    return l2_normalize_rows(m);
}

Dataset benchmark_dataset(const ExperimentConfig& cfg, Matrix& test_features,
                          std::vector<int>& test_labels) {
    Rng rng(cfg.seed);
    const auto counts = longtail_counts(cfg.N, cfg.K, cfg.rho);
    Rng cluster_rng = rng.substream("clusters");
    const auto spec =
        make_cluster_spec(cfg.K, cfg.dim, cfg.cluster_separation, cfg.cluster_stddev, cluster_rng);
    Rng feature_rng = rng.substream("features");
    Dataset ds = gaussian_dataset(counts, spec, feature_rng);
    if (cfg.gamma > 0.0) {
        const auto T = transition_matrix(counts, cfg.gamma);
        Rng corrupt_rng = rng.substream("corrupt");
        ds.observed_labels = corrupt_labels(ds.true_labels, T, corrupt_rng);
        ds.class_counts = count_observed(ds.observed_labels, cfg.K);
    }
    Rng test_rng = rng.substream("test");
    const Dataset test =
        gaussian_dataset(std::vector<int>(cfg.K, cfg.test_per_class), spec, test_rng);
    test_features = test.features;
    test_labels = test.true_labels;
    return ds;
}

}  // namespace

TEST_CASE("identity augmentation: zero sigmas and mask keep unit features") {
    Rng r(1);
    const Matrix f = unit_rows(5, 4, r);
    const ViewPair v = make_views(f, r, 0.0, 0.0, 0.0);
    CHECK(v.weak.data() == f.data());
    for (std::size_t i = 0; i < v.strong.data().size(); ++i) {
        CHECK(v.strong.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("views are deterministic under a fixed seed") {
    Rng r1(9), r2(9);
    Matrix f(6, 5);
    Rng init(3);
    for (double& x : f.data()) x = init.gaussian();
    const ViewPair a = make_views(f, r1, 0.05, 0.3, 0.25);
    const ViewPair b = make_views(f, r2, 0.05, 0.3, 0.25);
    CHECK(a.weak.data() == b.weak.data());
    CHECK(a.strong.data() == b.strong.data());
}

TEST_CASE("strong views move farther than weak views") {
    Rng r(5);
    const Matrix f = unit_rows(1000, 8, r);
    const ViewPair v = make_views(f, r, 0.01, 0.1, 0.0);
    double weak_disp = 0.0, strong_disp = 0.0;
    for (std::size_t i = 0; i < f.rows(); ++i) {
        weak_disp += std::sqrt(squared_distance(v.weak.row(i), f.row(i)));
        strong_disp += std::sqrt(squared_distance(v.strong.row(i), f.row(i)));
    }
    CHECK(strong_disp > weak_disp);
}

TEST_CASE("pseudo-label assignment follows the confidence dichotomy") {
    Matrix probs(3, 4);
    probs(0, 1) = 0.8;   // confident -> model
    probs(1, 2) = 0.5;   // low -> transport
    probs(2, 0) = 0.7;   // exactly tau1 -> model branch
    for (std::size_t i = 0; i < 3; ++i) {
        double rest = 1.0;
        for (int k = 0; k < 4; ++k) rest -= probs(i, k);
        for (int k = 0; k < 4; ++k) {
            if (probs(i, k) == 0.0) probs(i, k) = rest / 3.0;
        }
    }
    OtLabels ot;
    ot.labels = {2, 3, 1};
    ot.confidence = {1.0, 1.0, 1.0};
    ot.present = {true, true, true};
    const PseudoLabelSet set = assign_pseudo_labels(probs, ot, 0.7);
    CHECK(set.kept == std::vector<bool>{true, true, true});
    CHECK(set.labels[0] == 1);
    CHECK(set.source[0] == PseudoSource::Model);
    CHECK(set.labels[1] == 3);
    CHECK(set.source[1] == PseudoSource::Transport);
    CHECK(set.labels[2] == 0);
    CHECK(set.source[2] == PseudoSource::Model);
}

TEST_CASE("sub-threshold sample without a transport label is dropped") {
    Matrix probs(1, 2);
    probs(0, 0) = 0.6;
    probs(0, 1) = 0.4;
    OtLabels ot;
    ot.labels = {-1};
    ot.confidence = {0.0};
    ot.present = {false};
    const PseudoLabelSet set = assign_pseudo_labels(probs, ot, 0.7);
    CHECK_FALSE(set.kept[0]);
    CHECK(set.kept_count() == 0);
}

TEST_CASE("tau1 sweep shifts sources monotonically from model to transport") {
    Rng r(13);
    const int K = 5;
    Matrix probs(50, K);
    for (std::size_t i = 0; i < 50; ++i) {
        auto row = probs.row(i);
        double sum = 0.0;
        for (double& x : row) {
            x = 0.01 + r.uniform();
            sum += x;
        }
        for (double& x : row) x /= sum;
    }
    OtLabels ot;
    ot.labels.assign(50, 2);
    ot.confidence.assign(50, 1.0);
    ot.present.assign(50, true);
    int prev_model = 51;
    for (const double tau1 : {0.01, 0.2, 0.4, 0.6, 0.8, 0.99}) {
        const PseudoLabelSet set = assign_pseudo_labels(probs, ot, tau1);
        int n_model = 0;
        for (std::size_t i = 0; i < 50; ++i) {
            REQUIRE(set.kept[i]);
            const auto row = probs.row(i);
            const double pmax = *std::max_element(row.begin(), row.end());
            if (set.source[i] == PseudoSource::Model) {
                CHECK(pmax >= tau1);
                ++n_model;
            } else {
                CHECK(pmax < tau1);
            }
        }
        CHECK(n_model <= prev_model);
        prev_model = n_model;
    }
}

TEST_CASE("contrastive loss is near zero for orthonormal pairs at low temperature") {
    Matrix z(4, 4);
    for (int i = 0; i < 4; ++i) z(i, i) = 1.0;
    CHECK(contrastive_loss(z, z, 0.05) < 1e-6);
}

TEST_CASE("contrastive loss hits ln(2M-1) when all rows are identical") {
    const std::size_t M = 6;
    Matrix z(M, 3);
    for (std::size_t i = 0; i < M; ++i) z(i, 0) = 1.0;
    CHECK(contrastive_loss(z, z, 0.5) == doctest::Approx(std::log(2.0 * M - 1.0)).epsilon(1e-12));
}

TEST_CASE("contrastive loss is invariant to sample permutation") {
    Rng r(17);
    const Matrix zw = unit_rows(8, 5, r);
    const Matrix zs = unit_rows(8, 5, r);
    const double base = contrastive_loss(zw, zs, 0.5);
    std::vector<std::size_t> perm{3, 1, 7, 0, 5, 2, 6, 4};
    Matrix pw(8, 5), ps(8, 5);
    for (std::size_t i = 0; i < 8; ++i) {
        std::copy(zw.row(perm[i]).begin(), zw.row(perm[i]).end(), pw.row(i).begin());
        std::copy(zs.row(perm[i]).begin(), zs.row(perm[i]).end(), ps.row(i).begin());
    }
    CHECK(contrastive_loss(pw, ps, 0.5) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("contrastive loss on a single sample is zero") {
    Matrix z(1, 3);
    z(0, 0) = 1.0;
    CHECK(contrastive_loss(z, z, 0.5) == 0.0);
}

TEST_CASE("ssl loss: empty pseudo set reduces to supervised CE") {
    Rng r(19);
    LinearModel m = zero_model(3, 4);
    for (double& x : m.weights.data()) x = r.gaussian();
    Matrix lab(4, 4);
    for (double& x : lab.data()) x = r.gaussian();
    const std::vector<int> y{0, 1, 2, 0};
    const Matrix empty(0, 4);
    CHECK(ssl_loss(m, lab, y, empty, {}) == doctest::Approx(ce_loss(m, lab, y)).epsilon(1e-15));
}

TEST_CASE("ssl loss matches a per-sample CE oracle on a 2-sample instance") {
    LinearModel m = zero_model(2, 2);
    m.weights(0, 0) = 1.0;
    m.weights(1, 1) = 1.0;
    Matrix lab(1, 2);
    lab(0, 0) = 2.0;
    Matrix pseudo(1, 2);
    pseudo(0, 1) = 1.0;
    // hand CE: labeled sample logits [2,0] label 0; pseudo sample logits [0,1] label 1
    const double ce_lab = -std::log(std::exp(2.0) / (std::exp(2.0) + 1.0));
    const double ce_pse = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
    CHECK(ssl_loss(m, lab, {0}, pseudo, {1}) == doctest::Approx(ce_lab + ce_pse).epsilon(1e-12));
}

TEST_CASE("perfect predictions drive the ssl loss to zero") {
    LinearModel m = zero_model(2, 1);
    m.weights(0, 0) = 60.0;
    m.weights(1, 0) = -60.0;
    Matrix x(2, 1);
    x(0, 0) = 1.0;
    x(1, 0) = -1.0;
    CHECK(ssl_loss(m, x, {0, 1}, x, {0, 1}) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("total loss: hand arithmetic and edge coefficients") {
    const LossBreakdown b = total_loss(1.0, 0.5, 0.2, 0.2, 0.1);
    CHECK(b.l_total == doctest::Approx(1.12).epsilon(1e-15));
    CHECK(total_loss(0.8, 5.0, 9.0, 0.0, 0.0).l_total == doctest::Approx(0.8));
    CHECK(total_loss(0.0, 0.0, 0.0, 0.2, 0.1).l_total == 0.0);
}

TEST_CASE("total loss decomposition is exact in the logged components") {
    Rng r(23);
    for (int trial = 0; trial < 100; ++trial) {
        const double l_ssl = 3.0 * r.uniform();
        const double l_sw = 2.0 * r.uniform();
        const double l_con = 4.0 * r.uniform();
        const LossBreakdown b = total_loss(l_ssl, l_sw, l_con, 0.2, 0.1);
        CHECK(b.l_total == b.l_ssl + b.lambda_sw * b.l_sw + b.lambda_c * b.l_con);
    }
}

TEST_CASE("total loss rejects non-finite components") {
    CHECK_THROWS_AS(total_loss(std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, 0.2, 0.1),
                    std::runtime_error);
}

TEST_CASE("gradient of l_total matches finite differences with the plan frozen") {
    Rng r(29);
    for (int probe = 0; probe < 5; ++probe) {
        const int K = 3;
        const std::size_t d = 4;
        LinearModel m = zero_model(K, d);
        for (double& x : m.weights.data()) x = 0.5 * r.gaussian();
        for (double& x : m.bias) x = 0.1 * r.gaussian();
        Matrix lab(3, d), pseudo(2, d);
        for (double& x : lab.data()) x = r.gaussian();
        for (double& x : pseudo.data()) x = r.gaussian();
        const std::vector<int> y_lab{0, 1, 2}, y_pse{2, 0};

        // The transport and contrastive terms depend only on fixed features,
        // so the parameter gradient of l_total equals the gradient of l_ssl.
        const double l_sw = 0.42, l_con = 0.17;
        const Gradient analytic = ssl_grad(m, lab, y_lab, pseudo, y_pse);
        const Gradient fd = testsupport::finite_difference_grad(m, [&](const LinearModel& p) {
            return total_loss(ssl_loss(p, lab, y_lab, pseudo, y_pse), l_sw, l_con, 0.2, 0.1)
                .l_total;
        });
        CHECK(testsupport::grad_rel_error(analytic, fd) <= 1e-4);
    }
}

TEST_CASE("pipeline with ssl_rounds=0 returns the warm-up model exactly") {
    ExperimentConfig cfg;
    cfg.N = 300;
    cfg.K = 4;
    cfg.dim = 8;
    cfg.rho = 10.0;
    cfg.gamma = 0.3;
    cfg.warmup_epochs = 5;
    cfg.ssl_rounds = 0;
    cfg.test_per_class = 20;
    cfg.seed = 3;
    Matrix test_x;
    std::vector<int> test_y;
    const Dataset ds = benchmark_dataset(cfg, test_x, test_y);
    const PipelineResult res = run_pipeline(cfg, ds, test_x, test_y);

    LinearModel warm = zero_model(cfg.K, cfg.dim);
    Rng warm_rng = Rng(cfg.seed).substream("warmup");
    train_warmup(warm, ds, cfg.warmup_epochs, cfg.lr, cfg.batch_size, warm_rng);
    CHECK(res.model.weights.data() == warm.weights.data());
    CHECK(res.model.bias == warm.bias);
    CHECK(res.final_test_accuracy == res.warmup_test_accuracy);
}

TEST_CASE("pipeline does not regress on clean data") {
    ExperimentConfig cfg;
    cfg.N = 400;
    cfg.K = 4;
    cfg.dim = 8;
    cfg.rho = 5.0;
    cfg.gamma = 0.0;
    cfg.warmup_epochs = 10;
    cfg.ssl_rounds = 5;
    cfg.test_per_class = 50;
    cfg.seed = 5;
    Matrix test_x;
    std::vector<int> test_y;
    const Dataset ds = benchmark_dataset(cfg, test_x, test_y);
    const PipelineResult res = run_pipeline(cfg, ds, test_x, test_y);
    CHECK(res.final_test_accuracy >= res.warmup_test_accuracy - 1e-12);
}

TEST_CASE("pipeline metric traces are identical under a fixed seed") {
    ExperimentConfig cfg;
    cfg.N = 300;
    cfg.K = 4;
    cfg.dim = 8;
    cfg.rho = 10.0;
    cfg.gamma = 0.4;
    cfg.warmup_epochs = 5;
    cfg.ssl_rounds = 3;
    cfg.test_per_class = 20;
    cfg.seed = 7;
    Matrix test_x;
    std::vector<int> test_y;
    const Dataset ds = benchmark_dataset(cfg, test_x, test_y);
    const PipelineResult a = run_pipeline(cfg, ds, test_x, test_y);
    const PipelineResult b = run_pipeline(cfg, ds, test_x, test_y);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].l_total == b.rounds[i].l_total);
        CHECK(a.rounds[i].pseudo_accuracy == b.rounds[i].pseudo_accuracy);
        CHECK(a.rounds[i].test_accuracy == b.rounds[i].test_accuracy);
        CHECK(a.rounds[i].n_transport == b.rounds[i].n_transport);
    }
    CHECK(a.model.weights.data() == b.model.weights.data());
}

#pragma once

#include <string>
#include <vector>

#include "otc/classifier.hpp"
#include "otc/config.hpp"
#include "otc/dataset.hpp"
#include "otc/selection.hpp"
#include "otc/transport.hpp"

namespace otc {

// Weak and strong feature-space augmentations of the same samples.
struct ViewPair {
    Matrix weak;    // features + gaussian jitter
    Matrix strong;  // heavier jitter + coordinate masking, unit-L2 rows
};

ViewPair make_views(const Matrix& features, Rng& rng, double weak_sigma, double strong_sigma,
                    double strong_mask_frac);

enum class PseudoSource { Model, Transport };

struct PseudoLabelSet {
    std::vector<int> labels;
    std::vector<PseudoSource> source;
    std::vector<bool> kept;

    std::size_t kept_count() const;
};

// Model argmax when max prob >= tau1, otherwise the transport label; samples
// with neither are dropped.
PseudoLabelSet assign_pseudo_labels(const Matrix& probs_weak, const OtLabels& ot_labels,
                                    double tau1);

// Symmetric in-batch InfoNCE over weak/strong pairs (2M anchors, 2M-1
// candidates each). Rows must be unit-norm. M == 1 returns 0.
double contrastive_loss(const Matrix& z_weak, const Matrix& z_strong, double temperature);

// Mean CE on the labeled set plus mean CE on kept pseudo-labeled views,
// equally weighted; an empty set contributes 0.
double ssl_loss(const LinearModel& model, const Matrix& labeled_features,
                const std::vector<int>& labeled_targets, const Matrix& pseudo_features,
                const std::vector<int>& pseudo_targets);

Gradient ssl_grad(const LinearModel& model, const Matrix& labeled_features,
                  const std::vector<int>& labeled_targets, const Matrix& pseudo_features,
                  const std::vector<int>& pseudo_targets);

struct LossBreakdown {
    double l_ssl = 0.0;
    double l_sw = 0.0;
    double l_con = 0.0;
    double l_total = 0.0;
    double lambda_sw = 0.0;
    double lambda_c = 0.0;
};

// l_total = l_ssl + lambda_sw * l_sw + lambda_c * l_con, kept for logging.
// Throws on non-finite components.
LossBreakdown total_loss(double l_ssl, double l_sw, double l_con, double lambda_sw,
                         double lambda_c);

struct AblationToggles {
    bool cdt = true;  // class-specific dynamic thresholds
    bool lcs = true;  // loss-distance cross-selection
    bool otp = true;  // optimal-transport pseudo-labels
};

struct RoundMetrics {
    int round = 0;
    double l_ssl = 0.0;
    double l_sw = 0.0;
    double l_con = 0.0;
    double l_total = 0.0;
    double pseudo_accuracy = 0.0;  // kept pseudo-labels vs true labels
    int n_model = 0;               // kept, model-sourced
    int n_transport = 0;           // kept, transport-sourced
    int n_clean = 0;               // labeled-set size this round
    double test_accuracy = 0.0;
    // Book-keeping for transport quality on the sub-threshold population.
    int sub_threshold_total = 0;
    int sub_threshold_ot_correct = 0;
    int sub_threshold_model_correct = 0;
};

struct PlanDump {
    int round = 0;
    int batch = 0;
    int iterations = 0;
    double row_violation = 0.0;
    double col_violation = 0.0;
    Matrix plan;
};

struct PipelineResult {
    LinearModel model;
    std::vector<double> warmup_loss;
    std::vector<RoundMetrics> rounds;
    double warmup_test_accuracy = 0.0;
    double final_test_accuracy = 0.0;
    std::vector<PlanDump> plan_dumps;  // filled when dump_plans is set
};

// Warm-up on observed labels, then ssl_rounds of selection refresh and
// optimization denoising. Deterministic under config.seed.
PipelineResult run_pipeline(const ExperimentConfig& config, const Dataset& train,
                            const Matrix& test_features, const std::vector<int>& test_labels,
                            const AblationToggles& toggles = {}, bool dump_plans = false);

}  // namespace otc

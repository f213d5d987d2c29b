#pragma once

#include <cstdint>
#include <string>

namespace otc {

// Experiment configuration. JSON keys match field names one-to-one.
struct ExperimentConfig {
    // Problem shape
    int K = 10;      // class count
    int N = 2000;    // training samples before rounding
    int dim = 16;    // feature dimension

    // Corruption
    double rho = 100.0;   // imbalance ratio, >= 1
    double gamma = 0.5;   // noise ratio, [0, 1)

    // Selection
    double lambda_ema = 0.99;  // threshold EMA coefficient, [0, 1]
    double tau1 = 0.7;         // pseudo-label confidence threshold, (0, 1)

    // Loss coefficients
    double lambda_sw = 0.2;
    double lambda_c = 0.1;

    // Training
    int warmup_epochs = 25;
    int ssl_rounds = 15;
    double lr = 0.5;
    std::uint64_t seed = 1;
    int batch_size = 128;

    // Sinkhorn
    double sinkhorn_eps = 0.05;
    int sinkhorn_iters = 1000;
    double sinkhorn_tol = 1e-6;

    // Synthetic feature geometry
    double cluster_separation = 6.0;
    double cluster_stddev = 1.0;
    int test_per_class = 100;

    // Augmentation (feature-space views)
    double weak_sigma = 0.05;
    double strong_sigma = 0.3;
    double strong_mask_frac = 0.25;
    double contrast_temperature = 0.5;

    // Selection refresh cadence in SSL rounds
    int select_refresh_every = 1;
};

// Throws std::invalid_argument naming the offending field, its value and the
// valid range.
void validate(const ExperimentConfig& cfg);

// JSON round-trip. parse_config applies defaults for absent keys and rejects
// unknown keys; both validate.
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

}  // namespace otc

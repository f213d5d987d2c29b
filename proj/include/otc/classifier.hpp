#pragma once

#include <string>
#include <vector>

#include "otc/dataset.hpp"
#include "otc/matrix.hpp"
#include "otc/rng.hpp"

namespace otc {

// Softmax classifier over raw features: p = softmax(W x + b).
struct LinearModel {
    Matrix weights;            // K x d
    std::vector<double> bias;  // K

    int num_classes() const { return static_cast<int>(bias.size()); }
    std::size_t dim() const { return weights.cols(); }
};

LinearModel zero_model(int K, std::size_t dim);

// Representation used for centroids and transport costs. Identity keeps raw
// features; NormalizedIdentity emits unit-L2 rows, which keeps the
// one-minus-dot cost in [0, 2].
enum class FeatureMode { Identity, NormalizedIdentity };

Matrix extract_features(const Matrix& features, FeatureMode mode);

// Row-wise softmax of X W^T + b. Throws on dimension mismatch.
Matrix forward(const LinearModel& model, const Matrix& features);

struct Gradient {
    Matrix weights;            // K x d
    std::vector<double> bias;  // K

    void scale(double s);
    void add_scaled(const Gradient& other, double s);
};

Gradient zero_gradient(int K, std::size_t dim);

double ce_loss(const LinearModel& model, const Matrix& features, const std::vector<int>& labels);

// Gradient of the mean cross-entropy over the batch.
Gradient ce_grad(const LinearModel& model, const Matrix& features, const std::vector<int>& labels);

void sgd_step(LinearModel& model, const Gradient& grad, double lr);

struct WarmupTrace {
    std::vector<double> epoch_loss;
};

// Plain minibatch SGD on observed labels. Deterministic under a fixed rng.
// Throws std::runtime_error when the loss goes non-finite.
WarmupTrace train_warmup(LinearModel& model, const Dataset& dataset, int epochs, double lr,
                         int batch_size, Rng& rng);

double accuracy(const LinearModel& model, const Matrix& features, const std::vector<int>& labels);

// Checkpoint JSON: shape header + row-major parameter arrays.
std::string model_to_json_text(const LinearModel& model);
LinearModel model_from_json_text(const std::string& text);

}  // namespace otc

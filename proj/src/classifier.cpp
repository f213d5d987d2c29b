#include "otc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace otc {

LinearModel zero_model(int K, std::size_t dim) {
    return LinearModel{Matrix(K, dim), std::vector<double>(K, 0.0)};
}

Matrix extract_features(const Matrix& features, FeatureMode mode) {
    return mode == FeatureMode::Identity ? features : l2_normalize_rows(features);
}

Matrix forward(const LinearModel& model, const Matrix& features) {
    if (features.cols() != model.weights.cols()) {
        throw std::invalid_argument("forward: feature dimension mismatch");
    }
    const int K = model.num_classes();
    Matrix probs(features.rows(), K);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto x = features.row(i);
        auto p = probs.row(i);
        for (int k = 0; k < K; ++k) p[k] = dot(model.weights.row(k), x) + model.bias[k];
        softmax_inplace(p);
    }
    return probs;
}

void Gradient::scale(double s) {
    for (double& x : weights.data()) x *= s;
    for (double& x : bias) x *= s;
}

void Gradient::add_scaled(const Gradient& other, double s) {
    for (std::size_t i = 0; i < weights.data().size(); ++i) {
        weights.data()[i] += s * other.weights.data()[i];
    }
    for (std::size_t k = 0; k < bias.size(); ++k) bias[k] += s * other.bias[k];
}

Gradient zero_gradient(int K, std::size_t dim) {
    return Gradient{Matrix(K, dim), std::vector<double>(K, 0.0)};
}

double ce_loss(const LinearModel& model, const Matrix& features, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    const Matrix probs = forward(model, features);
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        loss -= std::log(std::max(probs(i, labels[i]), 1e-300));
    }
    return loss / static_cast<double>(labels.size());
}

Gradient ce_grad(const LinearModel& model, const Matrix& features, const std::vector<int>& labels) {
    const int K = model.num_classes();
    const std::size_t d = model.dim();
    Gradient g = zero_gradient(K, d);
    if (labels.empty()) return g;
    for (int y : labels) {
        if (y < 0 || y >= K) throw std::invalid_argument("ce_grad: label out of range");
    }
    const Matrix probs = forward(model, features);
    const double inv_b = 1.0 / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto x = features.row(i);
        const auto p = probs.row(i);
        for (int k = 0; k < K; ++k) {
            const double delta = (p[k] - (labels[i] == k ? 1.0 : 0.0)) * inv_b;
            g.bias[k] += delta;
            auto wrow = g.weights.row(k);
            for (std::size_t c = 0; c < d; ++c) wrow[c] += delta * x[c];
        }
    }
    return g;
}

void sgd_step(LinearModel& model, const Gradient& grad, double lr) {
    for (std::size_t i = 0; i < model.weights.data().size(); ++i) {
        model.weights.data()[i] -= lr * grad.weights.data()[i];
    }
    for (std::size_t k = 0; k < model.bias.size(); ++k) model.bias[k] -= lr * grad.bias[k];
}

WarmupTrace train_warmup(LinearModel& model, const Dataset& dataset, int epochs, double lr,
                         int batch_size, Rng& rng) {
    if (epochs < 0) throw std::invalid_argument("train_warmup: epochs must be >= 0");
    WarmupTrace trace;
    const std::size_t N = dataset.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < N; start += batch_size) {
            const std::size_t stop = std::min(N, start + batch_size);
            Matrix bx(stop - start, dataset.features.cols());
            std::vector<int> by(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const auto src = dataset.features.row(order[i]);
                std::copy(src.begin(), src.end(), bx.row(i - start).begin());
                by[i - start] = dataset.observed_labels[order[i]];
            }
            sgd_step(model, ce_grad(model, bx, by), lr);
        }
        const double loss = ce_loss(model, dataset.features, dataset.observed_labels);
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_warmup: non-finite loss at epoch " + std::to_string(epoch));
        }
        trace.epoch_loss.push_back(loss);
    }
    return trace;
}

double accuracy(const LinearModel& model, const Matrix& features, const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    const Matrix probs = forward(model, features);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto p = probs.row(i);
        const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::string model_to_json_text(const LinearModel& model) {
    nlohmann::json j;
    j["rows"] = model.weights.rows();
    j["cols"] = model.weights.cols();
    j["weights"] = model.weights.data();
    j["bias"] = model.bias;
    return j.dump();
}

LinearModel model_from_json_text(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const std::size_t rows = j.at("rows").get<std::size_t>();
    const std::size_t cols = j.at("cols").get<std::size_t>();
    LinearModel model = zero_model(static_cast<int>(rows), cols);
    model.weights.data() = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<std::vector<double>>();
    if (model.weights.data().size() != rows * cols || model.bias.size() != rows) {
        throw std::invalid_argument("model checkpoint: shape mismatch");
    }
    return model;
}

}  // namespace otc

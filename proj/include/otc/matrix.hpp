#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace otc {

// Dense row-major matrix of doubles. All pipeline math stays in double
// precision; Sinkhorn and EM are sensitive to cancellation at small eps.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
double squared_distance(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);
bool all_finite(const Matrix& m);

// Rows with zero norm are left unchanged.
Matrix l2_normalize_rows(const Matrix& m);

// Numerically stable softmax (max subtraction). Throws std::invalid_argument
// on non-finite input.
std::vector<double> softmax(std::span<const double> logits);
void softmax_inplace(std::span<double> logits);

// A ProbMatrix is a Matrix whose rows are probability vectors.
bool is_prob_matrix(const Matrix& m, double tol = 1e-6);

}  // namespace otc

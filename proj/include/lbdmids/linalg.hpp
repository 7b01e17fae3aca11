#pragma once

#include <cstddef>
#include <vector>

#include "lbdmids/errors.hpp"

namespace lbdmids {

using Vector = std::vector<double>;

/// Dense row-major real64 matrix. The row-major layout is load-bearing:
/// the on-disk model format serializes weight matrices as raw row-major
/// arrays (see train.hpp).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double* row(std::size_t r) { return data_.data() + r * cols_; }
    const double* row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Rank-3 container (samples x timesteps x features), row-major contiguous.
/// Container only; all algebra stays rank-2.
struct Tensor3 {
    std::size_t samples = 0;
    std::size_t timesteps = 0;
    std::size_t features = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(std::size_t s, std::size_t t, std::size_t f)
        : samples(s), timesteps(t), features(f), data(s * t * f, 0.0) {}

    double& at(std::size_t s, std::size_t t, std::size_t f) {
        return data[(s * timesteps + t) * features + f];
    }
    double at(std::size_t s, std::size_t t, std::size_t f) const {
        return data[(s * timesteps + t) * features + f];
    }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

enum class ElemOp { add, sub, mul };
enum class Activation { sigmoid, tanh };

double sigmoid(double x);

// All operations are pure: inputs are never mutated, results are fresh values.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b); // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b); // a^T * b
Vector matvec(const Matrix& a, const Vector& x);
Matrix transpose(const Matrix& a);

Matrix elementwise(ElemOp op, const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix mul(const Matrix& a, const Matrix& b);

Matrix apply(Activation f, const Matrix& a);
Matrix scale(const Matrix& a, double s);
void add_in(Matrix& a, const Matrix& b);

Vector col_sums(const Matrix& a);
Matrix hconcat(const Matrix& a, const Matrix& b);

} // namespace lbdmids

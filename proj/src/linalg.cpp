#include "lbdmids/linalg.hpp"

#include <cmath>
#include <string>

namespace lbdmids {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": dimension mismatch (" + shape_str(a) +
                             " vs " + shape_str(b) + ")");
    }
}

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("matrix dimensions must be positive (got " +
                             std::to_string(rows) + "x" + std::to_string(cols) + ")");
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: dimension mismatch (" + shape_str(a) + " vs " +
                             shape_str(b) + ")");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("matmul_nt: dimension mismatch (" + shape_str(a) + " vs " +
                             shape_str(b) + "^T)");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            orow[j] = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("matmul_tn: dimension mismatch (" + shape_str(a) + "^T vs " +
                             shape_str(b) + ")");
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            double* orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols() != x.size()) {
        throw DimensionError("matvec: dimension mismatch (" + shape_str(a) + " vs vector of " +
                             std::to_string(x.size()) + ")");
    }
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += arow[j] * x[j];
        out[i] = acc;
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix elementwise(ElemOp op, const Matrix& a, const Matrix& b) {
    require_same_shape("elementwise", a, b);
    Matrix out = a;
    double* o = out.data().data();
    const double* p = b.data().data();
    const std::size_t n = out.data().size();
    switch (op) {
        case ElemOp::add:
            for (std::size_t i = 0; i < n; ++i) o[i] += p[i];
            break;
        case ElemOp::sub:
            for (std::size_t i = 0; i < n; ++i) o[i] -= p[i];
            break;
        case ElemOp::mul:
            for (std::size_t i = 0; i < n; ++i) o[i] *= p[i];
            break;
    }
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) { return elementwise(ElemOp::add, a, b); }
Matrix sub(const Matrix& a, const Matrix& b) { return elementwise(ElemOp::sub, a, b); }
Matrix mul(const Matrix& a, const Matrix& b) { return elementwise(ElemOp::mul, a, b); }

Matrix apply(Activation f, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.data()) v = (f == Activation::sigmoid) ? sigmoid(v) : std::tanh(v);
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.data()) v *= s;
    return out;
}

void add_in(Matrix& a, const Matrix& b) {
    require_same_shape("add_in", a, b);
    double* o = a.data().data();
    const double* p = b.data().data();
    for (std::size_t i = 0; i < a.data().size(); ++i) o[i] += p[i];
}

Vector col_sums(const Matrix& a) {
    Vector out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += arow[j];
    }
    return out;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("hconcat: row mismatch (" + shape_str(a) + " vs " + shape_str(b) +
                             ")");
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row(i);
        const double* arow = a.row(i);
        const double* brow = b.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) orow[j] = arow[j];
        for (std::size_t j = 0; j < b.cols(); ++j) orow[a.cols() + j] = brow[j];
    }
    return out;
}

} // namespace lbdmids

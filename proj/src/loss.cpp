#include "lbdmids/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lbdmids/errors.hpp"

namespace lbdmids {

namespace {

// Writes softmax of `row` into `out` and returns log(sum exp(z - zmax)) + zmax,
// so callers can form log p_k = z_k - lse without a second pass.
double softmax_row(const double* row, std::size_t k, double* out) {
    double zmax = row[0];
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        out[j] = std::exp(row[j] - zmax);
        sum += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
    return std::log(sum) + zmax;
}

CceResult xent_impl(const Matrix& logits, const std::vector<std::size_t>& labels, double scale) {
    const std::size_t b = logits.rows();
    const std::size_t k = logits.cols();
    if (labels.size() != b) {
        throw DimensionError("sparse_cce: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(b) + " logit rows");
    }
    CceResult res;
    res.dlogits = Matrix(b, k);
    for (std::size_t r = 0; r < b; ++r) {
        if (labels[r] >= k) {
            throw DataError("sparse_cce: label " + std::to_string(labels[r]) +
                            " out of range for " + std::to_string(k) + " classes");
        }
        double* drow = res.dlogits.row(r);
        const double lse = softmax_row(logits.row(r), k, drow);
        res.loss -= (logits(r, labels[r]) - lse) * scale;
        for (std::size_t j = 0; j < k; ++j) drow[j] *= scale;
        drow[labels[r]] -= scale;
    }
    return res;
}

} // namespace

Vector softmax(const Vector& logits) {
    if (logits.empty()) throw DimensionError("softmax: empty logit vector");
    Vector out(logits.size());
    softmax_row(logits.data(), logits.size(), out.data());
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        softmax_row(logits.row(r), logits.cols(), out.row(r));
    }
    return out;
}

CceResult sparse_cce(const Matrix& logits, const std::vector<std::size_t>& labels) {
    return xent_impl(logits, labels, 1.0 / static_cast<double>(logits.rows()));
}

CceResult softmax_xent_sum(const Matrix& logits, const std::vector<std::size_t>& labels) {
    return xent_impl(logits, labels, 1.0);
}

OptimizerState make_optimizer(const LstmParams& params, double learning_rate) {
    OptimizerState st;
    st.m = zeros_like(params);
    st.v = zeros_like(params);
    st.learning_rate = learning_rate;
    return st;
}

void adam_step(LstmParams& params, const ParamGrads& grads, OptimizerState& state) {
    auto theta = param_arrays(params);
    auto g = param_arrays(grads);
    auto m = param_arrays(state.m);
    auto v = param_arrays(state.v);
    if (theta.size() != g.size()) {
        throw DimensionError("adam_step: gradient layout does not match parameters");
    }
    state.step += 1;
    const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t a = 0; a < theta.size(); ++a) {
        std::vector<double>& t = *theta[a];
        const std::vector<double>& gr = *g[a];
        std::vector<double>& ma = *m[a];
        std::vector<double>& va = *v[a];
        if (gr.size() != t.size()) {
            throw DimensionError("adam_step: gradient array size mismatch");
        }
        for (std::size_t k = 0; k < t.size(); ++k) {
            ma[k] = state.beta1 * ma[k] + (1.0 - state.beta1) * gr[k];
            va[k] = state.beta2 * va[k] + (1.0 - state.beta2) * gr[k] * gr[k];
            const double mhat = ma[k] / b1t;
            const double vhat = va[k] / b2t;
            t[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

double global_norm(const ParamGrads& grads) {
    double sq = 0.0;
    for (const auto* arr : param_arrays(grads)) {
        for (double x : *arr) sq += x * x;
    }
    return std::sqrt(sq);
}

void clip_global_norm(ParamGrads& grads, double max_norm) {
    if (max_norm <= 0.0) return;
    const double norm = global_norm(grads);
    if (norm <= max_norm) return;
    const double s = max_norm / norm;
    for (auto* arr : param_arrays(grads)) {
        for (double& x : *arr) x *= s;
    }
}

} // namespace lbdmids

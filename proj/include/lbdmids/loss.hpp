#pragma once

#include <cstddef>
#include <vector>

#include "lbdmids/linalg.hpp"
#include "lbdmids/nn.hpp"

namespace lbdmids {

// Numerically stable softmax via max subtraction.
Vector softmax(const Vector& logits);
Matrix softmax_rows(const Matrix& logits);

struct CceResult {
    double loss = 0.0;
    Matrix dlogits;
};

// Fused softmax + sparse categorical cross-entropy, averaged over the batch:
// loss = -(1/B) sum log p_label, dlogits = (softmax - onehot) / B.
CceResult sparse_cce(const Matrix& logits, const std::vector<std::size_t>& labels);

// Sum form of the same quantity: loss = -sum log p_label, dlogits = softmax - onehot.
// Used by the chunked training loop, which divides by the full batch size after
// accumulating per-chunk contributions.
CceResult softmax_xent_sum(const Matrix& logits, const std::vector<std::size_t>& labels);

struct OptimizerState {
    std::size_t step = 0;
    LstmParams m;
    LstmParams v;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

OptimizerState make_optimizer(const LstmParams& params, double learning_rate);

// One Adam update with bias correction; mutates params and state in place.
void adam_step(LstmParams& params, const ParamGrads& grads, OptimizerState& state);

double global_norm(const ParamGrads& grads);

// Rescales grads in place so their global norm is at most max_norm. No-op when
// already within bounds or max_norm <= 0.
void clip_global_norm(ParamGrads& grads, double max_norm);

} // namespace lbdmids

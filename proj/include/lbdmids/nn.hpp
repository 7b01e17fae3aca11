#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lbdmids/linalg.hpp"

namespace lbdmids {

enum class Variant { stacked, bidirectional };

/// One LSTM cell: four gates (input i, forget f, candidate g, output o),
/// each with an input-weight matrix (hidden x input), a recurrent matrix
/// (hidden x hidden) and a bias vector (hidden).
struct LstmCellParams {
    Matrix w_i, w_f, w_g, w_o;
    Matrix u_i, u_f, u_g, u_o;
    Vector b_i, b_f, b_g, b_o;

    std::size_t hidden() const { return w_i.rows(); }
    std::size_t input() const { return w_i.cols(); }
};

/// Full trainable parameter set of one model. backward_layers is empty for
/// stacked models and mirrors layers' shapes for bidirectional ones; the
/// dense head maps the final representation to class logits.
struct LstmParams {
    std::vector<LstmCellParams> layers;
    std::vector<LstmCellParams> backward_layers;
    Matrix dense_w; // classes x final width
    Vector dense_b; // classes

    bool bidirectional() const { return !backward_layers.empty(); }
    std::size_t final_width() const {
        std::size_t h = layers.back().hidden();
        return bidirectional() ? 2 * h : h;
    }
    std::size_t num_classes() const { return dense_b.size(); }
    std::size_t input_width() const { return layers.front().input(); }
};

// Gradients mirror the parameter layout exactly.
using ParamGrads = LstmParams;

struct NetworkShape {
    Variant variant = Variant::stacked;
    std::vector<std::size_t> layer_cells;
    std::size_t input_width = 0;
    std::size_t num_classes = 0;
};

/// Glorot-uniform weights in +/- sqrt(6 / (fan_in + fan_out)); biases zero
/// except the forget-gate bias, which starts at 1.0. Deterministic per seed.
LstmParams init_params(const NetworkShape& shape, std::uint64_t seed);
LstmParams zeros_like(const LstmParams& p);

/// Every parameter array of the model in a fixed traversal order:
/// for each forward layer w_i, w_f, w_g, w_o, u_i, u_f, u_g, u_o,
/// b_i, b_f, b_g, b_o; then each backward layer the same way; then
/// dense_w, dense_b. Serialization and the optimizer both rely on this
/// order, so it must never change.
std::vector<std::vector<double>*> param_arrays(LstmParams& p);
std::vector<const std::vector<double>*> param_arrays(const LstmParams& p);

struct CellCache {
    Vector gate_i, gate_f, gate_g, gate_o;
    Vector cell_tanh;
};

struct CellStep {
    Vector h, c;
    CellCache cache;
};

/// Single LSTM step: i = sig(Wi x + Ui h + bi), f, o alike; g = tanh(...);
/// c = f*c_prev + i*g; h = o*tanh(c).
CellStep cell_step(const LstmCellParams& p, const Vector& x, const Vector& h_prev,
                   const Vector& c_prev);

struct LayerTrace {
    // post-activation gates, cell and hidden states per timestep, batch x hidden
    std::vector<Matrix> gate_i, gate_f, gate_g, gate_o;
    std::vector<Matrix> cell, cell_tanh, hidden;
};

/// Everything the backward pass needs, captured during the forward pass.
struct ForwardTrace {
    std::vector<Matrix> inputs; // window slices per timestep, original order
    std::vector<LayerTrace> fwd;
    std::vector<LayerTrace> bwd; // empty unless bidirectional
    Matrix rep;                  // batch x final width, pre-dense
    std::size_t batch = 0;
    std::size_t timesteps = 0;
};

/// Stacked variant: every layer but the last feeds its full hidden sequence
/// upward; the last layer contributes h_T. Bidirectional variant: a second
/// stack consumes the reversed sequence and the final representation is
/// concat(forward h_T, backward h_T). The dense head emits raw logits;
/// softmax lives in the loss module.
Matrix forward_logits(const LstmParams& p, const Tensor3& window);
std::pair<Matrix, ForwardTrace> forward_sequence(const LstmParams& p, const Tensor3& window);

/// Exact gradients of the scalar loss whose logit-gradient is dlogits,
/// via backpropagation through time over all timesteps and layers.
ParamGrads backward_sequence(const LstmParams& p, const ForwardTrace& trace,
                             const Matrix& dlogits);

} // namespace lbdmids

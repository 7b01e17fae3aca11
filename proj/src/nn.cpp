#include "lbdmids/nn.hpp"

#include <cmath>
#include <string>

#include "lbdmids/rng.hpp"

namespace lbdmids {

namespace {

Matrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    // fan_out = rows, fan_in = cols for a (out x in) weight matrix
    const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-r, r);
    return m;
}

LstmCellParams init_cell(std::size_t hidden, std::size_t input, Rng& rng) {
    LstmCellParams c;
    c.w_i = glorot(hidden, input, rng);
    c.w_f = glorot(hidden, input, rng);
    c.w_g = glorot(hidden, input, rng);
    c.w_o = glorot(hidden, input, rng);
    c.u_i = glorot(hidden, hidden, rng);
    c.u_f = glorot(hidden, hidden, rng);
    c.u_g = glorot(hidden, hidden, rng);
    c.u_o = glorot(hidden, hidden, rng);
    c.b_i.assign(hidden, 0.0);
    c.b_f.assign(hidden, 1.0); // forget-gate bias starts open
    c.b_g.assign(hidden, 0.0);
    c.b_o.assign(hidden, 0.0);
    return c;
}

LstmCellParams zero_cell(const LstmCellParams& like) {
    LstmCellParams c;
    c.w_i = Matrix(like.w_i.rows(), like.w_i.cols());
    c.w_f = Matrix(like.w_f.rows(), like.w_f.cols());
    c.w_g = Matrix(like.w_g.rows(), like.w_g.cols());
    c.w_o = Matrix(like.w_o.rows(), like.w_o.cols());
    c.u_i = Matrix(like.u_i.rows(), like.u_i.cols());
    c.u_f = Matrix(like.u_f.rows(), like.u_f.cols());
    c.u_g = Matrix(like.u_g.rows(), like.u_g.cols());
    c.u_o = Matrix(like.u_o.rows(), like.u_o.cols());
    c.b_i.assign(like.b_i.size(), 0.0);
    c.b_f.assign(like.b_f.size(), 0.0);
    c.b_g.assign(like.b_g.size(), 0.0);
    c.b_o.assign(like.b_o.size(), 0.0);
    return c;
}

void cell_arrays(LstmCellParams& c, std::vector<std::vector<double>*>& out) {
    out.push_back(&c.w_i.data());
    out.push_back(&c.w_f.data());
    out.push_back(&c.w_g.data());
    out.push_back(&c.w_o.data());
    out.push_back(&c.u_i.data());
    out.push_back(&c.u_f.data());
    out.push_back(&c.u_g.data());
    out.push_back(&c.u_o.data());
    out.push_back(&c.b_i);
    out.push_back(&c.b_f);
    out.push_back(&c.b_g);
    out.push_back(&c.b_o);
}

// batch x hidden gate block: x W^T + h U^T + b broadcast over rows
Matrix gate_preact(const Matrix& x, const Matrix& w, const Matrix& h, const Matrix& u,
                   const Vector& b) {
    Matrix pre = matmul_nt(x, w);
    add_in(pre, matmul_nt(h, u));
    for (std::size_t r = 0; r < pre.rows(); ++r) {
        double* row = pre.row(r);
        for (std::size_t j = 0; j < b.size(); ++j) row[j] += b[j];
    }
    return pre;
}

Matrix timestep_slice(const Tensor3& w, std::size_t t) {
    Matrix m(w.samples, w.features);
    for (std::size_t s = 0; s < w.samples; ++s) {
        double* row = m.row(s);
        const double* src = &w.data[(s * w.timesteps + t) * w.features];
        for (std::size_t f = 0; f < w.features; ++f) row[f] = src[f];
    }
    return m;
}

// One direction of the network: a stack of LSTM layers over the sequence.
// reverse flips the order in which the raw window slices are consumed.
void run_direction(const std::vector<LstmCellParams>& layers, const std::vector<Matrix>& x0,
                   bool reverse, std::vector<LayerTrace>& out) {
    const std::size_t T = x0.size();
    const std::size_t B = x0.front().rows();
    out.clear();
    out.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LstmCellParams& p = layers[l];
        LayerTrace& tr = out[l];
        tr.gate_i.reserve(T);
        tr.gate_f.reserve(T);
        tr.gate_g.reserve(T);
        tr.gate_o.reserve(T);
        tr.cell.reserve(T);
        tr.cell_tanh.reserve(T);
        tr.hidden.reserve(T);
        Matrix h_prev(B, p.hidden());
        Matrix c_prev(B, p.hidden());
        for (std::size_t t = 0; t < T; ++t) {
            const Matrix& x =
                (l == 0) ? x0[reverse ? T - 1 - t : t] : out[l - 1].hidden[t];
            Matrix i = apply(Activation::sigmoid, gate_preact(x, p.w_i, h_prev, p.u_i, p.b_i));
            Matrix f = apply(Activation::sigmoid, gate_preact(x, p.w_f, h_prev, p.u_f, p.b_f));
            Matrix g = apply(Activation::tanh, gate_preact(x, p.w_g, h_prev, p.u_g, p.b_g));
            Matrix o = apply(Activation::sigmoid, gate_preact(x, p.w_o, h_prev, p.u_o, p.b_o));
            Matrix c = add(mul(f, c_prev), mul(i, g));
            Matrix ct = apply(Activation::tanh, c);
            Matrix h = mul(o, ct);
            h_prev = h;
            c_prev = c;
            tr.gate_i.push_back(std::move(i));
            tr.gate_f.push_back(std::move(f));
            tr.gate_g.push_back(std::move(g));
            tr.gate_o.push_back(std::move(o));
            tr.cell.push_back(std::move(c));
            tr.cell_tanh.push_back(std::move(ct));
            tr.hidden.push_back(std::move(h));
        }
    }
}

// BPTT through one direction's stack. d_final_h seeds the last layer's h_T;
// lower layers receive the dx sequences of the layer above.
void direction_backward(const std::vector<LstmCellParams>& layers,
                        const std::vector<LayerTrace>& traces, const std::vector<Matrix>& x0,
                        bool reverse, const Matrix& d_final_h,
                        std::vector<LstmCellParams>& grad_layers) {
    const std::size_t L = layers.size();
    const std::size_t T = traces.front().hidden.size();
    const std::size_t B = d_final_h.rows();

    std::vector<Matrix> dh_from_above; // per timestep, for the layer below
    for (std::size_t li = L; li-- > 0;) {
        const LstmCellParams& p = layers[li];
        const LayerTrace& tr = traces[li];
        LstmCellParams& g = grad_layers[li];
        const std::size_t H = p.hidden();
        const bool want_dx = li > 0;

        std::vector<Matrix> dx_seq;
        if (want_dx) dx_seq.assign(T, Matrix(B, layers[li - 1].hidden()));

        Matrix dh_next(B, H);
        Matrix dc_next(B, H);
        const Matrix zero_state(B, H);
        for (std::size_t t = T; t-- > 0;) {
            // total gradient into h_t: recurrent path plus external seed
            Matrix dh = dh_next;
            if (li == L - 1) {
                if (t == T - 1) add_in(dh, d_final_h);
            } else {
                add_in(dh, dh_from_above[t]);
            }

            const Matrix& gi = tr.gate_i[t];
            const Matrix& gf = tr.gate_f[t];
            const Matrix& gg = tr.gate_g[t];
            const Matrix& go = tr.gate_o[t];
            const Matrix& ct = tr.cell_tanh[t];
            const Matrix& c_prev = (t > 0) ? tr.cell[t - 1] : zero_state;
            const Matrix& h_prev = (t > 0) ? tr.hidden[t - 1] : zero_state;
            const Matrix& x = (li == 0) ? x0[reverse ? T - 1 - t : t] : traces[li - 1].hidden[t];

            const std::size_t n = B * H;
            Matrix dpre_i(B, H), dpre_f(B, H), dpre_g(B, H), dpre_o(B, H), dc(B, H);
            {
                const double* dhp = dh.data().data();
                const double* dcn = dc_next.data().data();
                const double* ip = gi.data().data();
                const double* fp = gf.data().data();
                const double* gp = gg.data().data();
                const double* op = go.data().data();
                const double* ctp = ct.data().data();
                const double* cpp = c_prev.data().data();
                double* dip = dpre_i.data().data();
                double* dfp = dpre_f.data().data();
                double* dgp = dpre_g.data().data();
                double* dop = dpre_o.data().data();
                double* dcp = dc.data().data();
                for (std::size_t k = 0; k < n; ++k) {
                    const double dhk = dhp[k];
                    dop[k] = dhk * ctp[k] * op[k] * (1.0 - op[k]);
                    const double dck = dhk * op[k] * (1.0 - ctp[k] * ctp[k]) + dcn[k];
                    dcp[k] = dck;
                    dfp[k] = dck * cpp[k] * fp[k] * (1.0 - fp[k]);
                    dip[k] = dck * gp[k] * ip[k] * (1.0 - ip[k]);
                    dgp[k] = dck * ip[k] * (1.0 - gp[k] * gp[k]);
                }
            }

            add_in(g.w_i, matmul_tn(dpre_i, x));
            add_in(g.w_f, matmul_tn(dpre_f, x));
            add_in(g.w_g, matmul_tn(dpre_g, x));
            add_in(g.w_o, matmul_tn(dpre_o, x));
            add_in(g.u_i, matmul_tn(dpre_i, h_prev));
            add_in(g.u_f, matmul_tn(dpre_f, h_prev));
            add_in(g.u_g, matmul_tn(dpre_g, h_prev));
            add_in(g.u_o, matmul_tn(dpre_o, h_prev));
            Vector bi = col_sums(dpre_i), bf = col_sums(dpre_f);
            Vector bg = col_sums(dpre_g), bo = col_sums(dpre_o);
            for (std::size_t j = 0; j < H; ++j) {
                g.b_i[j] += bi[j];
                g.b_f[j] += bf[j];
                g.b_g[j] += bg[j];
                g.b_o[j] += bo[j];
            }

            if (want_dx) {
                Matrix dx = matmul(dpre_i, p.w_i);
                add_in(dx, matmul(dpre_f, p.w_f));
                add_in(dx, matmul(dpre_g, p.w_g));
                add_in(dx, matmul(dpre_o, p.w_o));
                dx_seq[t] = std::move(dx);
            }

            dh_next = matmul(dpre_i, p.u_i);
            add_in(dh_next, matmul(dpre_f, p.u_f));
            add_in(dh_next, matmul(dpre_g, p.u_g));
            add_in(dh_next, matmul(dpre_o, p.u_o));
            dc_next = mul(dc, gf);
        }
        if (want_dx) dh_from_above = std::move(dx_seq);
    }
}

void check_window(const LstmParams& p, const Tensor3& window) {
    if (window.samples == 0 || window.timesteps == 0) {
        throw DimensionError("forward: empty window batch");
    }
    if (window.features != p.input_width()) {
        throw DimensionError("forward: window feature width " +
                             std::to_string(window.features) + " does not match model input " +
                             std::to_string(p.input_width()));
    }
}

std::pair<Matrix, ForwardTrace> forward_impl(const LstmParams& p, const Tensor3& window,
                                             bool want_trace) {
    check_window(p, window);
    const std::size_t T = window.timesteps;

    ForwardTrace trace;
    trace.batch = window.samples;
    trace.timesteps = T;
    trace.inputs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) trace.inputs.push_back(timestep_slice(window, t));

    run_direction(p.layers, trace.inputs, false, trace.fwd);
    Matrix rep = trace.fwd.back().hidden[T - 1];
    if (p.bidirectional()) {
        run_direction(p.backward_layers, trace.inputs, true, trace.bwd);
        rep = hconcat(rep, trace.bwd.back().hidden[T - 1]);
    }

    Matrix logits = matmul_nt(rep, p.dense_w);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double* row = logits.row(r);
        for (std::size_t j = 0; j < p.dense_b.size(); ++j) row[j] += p.dense_b[j];
    }

    if (want_trace) {
        trace.rep = std::move(rep);
        return {std::move(logits), std::move(trace)};
    }
    return {std::move(logits), ForwardTrace{}};
}

} // namespace

LstmParams init_params(const NetworkShape& shape, std::uint64_t seed) {
    if (shape.layer_cells.empty() || shape.input_width == 0 || shape.num_classes == 0) {
        throw DimensionError("init_params: network shape is incomplete");
    }
    Rng rng(seed);
    LstmParams p;
    std::size_t in = shape.input_width;
    for (std::size_t h : shape.layer_cells) {
        p.layers.push_back(init_cell(h, in, rng));
        in = h;
    }
    if (shape.variant == Variant::bidirectional) {
        in = shape.input_width;
        for (std::size_t h : shape.layer_cells) {
            p.backward_layers.push_back(init_cell(h, in, rng));
            in = h;
        }
    }
    p.dense_w = glorot(shape.num_classes, p.final_width(), rng);
    p.dense_b.assign(shape.num_classes, 0.0);
    return p;
}

LstmParams zeros_like(const LstmParams& p) {
    LstmParams z;
    for (const auto& c : p.layers) z.layers.push_back(zero_cell(c));
    for (const auto& c : p.backward_layers) z.backward_layers.push_back(zero_cell(c));
    z.dense_w = Matrix(p.dense_w.rows(), p.dense_w.cols());
    z.dense_b.assign(p.dense_b.size(), 0.0);
    return z;
}

std::vector<std::vector<double>*> param_arrays(LstmParams& p) {
    std::vector<std::vector<double>*> out;
    out.reserve(12 * (p.layers.size() + p.backward_layers.size()) + 2);
    for (auto& c : p.layers) cell_arrays(c, out);
    for (auto& c : p.backward_layers) cell_arrays(c, out);
    out.push_back(&p.dense_w.data());
    out.push_back(&p.dense_b);
    return out;
}

std::vector<const std::vector<double>*> param_arrays(const LstmParams& p) {
    auto mut = param_arrays(const_cast<LstmParams&>(p));
    return {mut.begin(), mut.end()};
}

CellStep cell_step(const LstmCellParams& p, const Vector& x, const Vector& h_prev,
                   const Vector& c_prev) {
    if (x.size() != p.input() || h_prev.size() != p.hidden() || c_prev.size() != p.hidden()) {
        throw DimensionError("cell_step: input/state sizes do not match cell shapes");
    }
    const std::size_t H = p.hidden();
    CellStep out;
    out.cache.gate_i = matvec(p.w_i, x);
    out.cache.gate_f = matvec(p.w_f, x);
    out.cache.gate_g = matvec(p.w_g, x);
    out.cache.gate_o = matvec(p.w_o, x);
    Vector ui = matvec(p.u_i, h_prev), uf = matvec(p.u_f, h_prev);
    Vector ug = matvec(p.u_g, h_prev), uo = matvec(p.u_o, h_prev);
    out.h.resize(H);
    out.c.resize(H);
    out.cache.cell_tanh.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
        const double i = sigmoid(out.cache.gate_i[j] + ui[j] + p.b_i[j]);
        const double f = sigmoid(out.cache.gate_f[j] + uf[j] + p.b_f[j]);
        const double g = std::tanh(out.cache.gate_g[j] + ug[j] + p.b_g[j]);
        const double o = sigmoid(out.cache.gate_o[j] + uo[j] + p.b_o[j]);
        out.cache.gate_i[j] = i;
        out.cache.gate_f[j] = f;
        out.cache.gate_g[j] = g;
        out.cache.gate_o[j] = o;
        out.c[j] = f * c_prev[j] + i * g;
        out.cache.cell_tanh[j] = std::tanh(out.c[j]);
        out.h[j] = o * out.cache.cell_tanh[j];
    }
    return out;
}

Matrix forward_logits(const LstmParams& p, const Tensor3& window) {
    return forward_impl(p, window, false).first;
}

std::pair<Matrix, ForwardTrace> forward_sequence(const LstmParams& p, const Tensor3& window) {
    return forward_impl(p, window, true);
}

ParamGrads backward_sequence(const LstmParams& p, const ForwardTrace& trace,
                             const Matrix& dlogits) {
    if (trace.fwd.size() != p.layers.size() || trace.bwd.size() != p.backward_layers.size() ||
        trace.timesteps == 0) {
        throw DimensionError("backward_sequence: trace does not match parameters");
    }
    if (dlogits.rows() != trace.batch || dlogits.cols() != p.num_classes()) {
        throw DimensionError("backward_sequence: dlogits shape mismatch (" +
                             std::to_string(dlogits.rows()) + "x" +
                             std::to_string(dlogits.cols()) + ")");
    }

    ParamGrads grads = zeros_like(p);
    grads.dense_w = matmul_tn(dlogits, trace.rep);
    grads.dense_b = col_sums(dlogits);

    Matrix drep = matmul(dlogits, p.dense_w); // batch x final width
    if (!p.bidirectional()) {
        direction_backward(p.layers, trace.fwd, trace.inputs, false, drep, grads.layers);
        return grads;
    }

    const std::size_t h = p.layers.back().hidden();
    Matrix dfwd(trace.batch, h), dbwd(trace.batch, h);
    for (std::size_t r = 0; r < trace.batch; ++r) {
        const double* src = drep.row(r);
        for (std::size_t j = 0; j < h; ++j) {
            dfwd(r, j) = src[j];
            dbwd(r, j) = src[h + j];
        }
    }
    direction_backward(p.layers, trace.fwd, trace.inputs, false, dfwd, grads.layers);
    direction_backward(p.backward_layers, trace.bwd, trace.inputs, true, dbwd,
                       grads.backward_layers);
    return grads;
}

} // namespace lbdmids

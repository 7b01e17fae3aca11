#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lbdmids/linalg.hpp"
#include "lbdmids/loss.hpp"
#include "lbdmids/nn.hpp"
#include "lbdmids/rng.hpp"

using namespace lbdmids;

namespace {

NetworkShape make_shape(Variant variant, std::vector<std::size_t> cells, std::size_t input,
                        std::size_t classes) {
    NetworkShape s;
    s.variant = variant;
    s.layer_cells = std::move(cells);
    s.input_width = input;
    s.num_classes = classes;
    return s;
}

Tensor3 random_window(std::size_t batch, std::size_t timesteps, std::size_t features, Rng& rng) {
    Tensor3 t(batch, timesteps, features);
    for (auto& v : t.data) v = rng.uniform(-1.5, 1.5);
    return t;
}

// Scalar reference for one cell step, written against the recurrence
// definition rather than the production matrix code.
struct ScalarStep {
    std::vector<double> i, f, g, o, c, h;
};

ScalarStep scalar_cell_step(const LstmCellParams& p, const std::vector<double>& x,
                            const std::vector<double>& h_prev, const std::vector<double>& c_prev) {
    const std::size_t n = p.hidden();
    auto preact = [&](const Matrix& w, const Matrix& u, const Vector& b, std::size_t r) {
        double a = b[r];
        for (std::size_t k = 0; k < p.input(); ++k) a += w(r, k) * x[k];
        for (std::size_t k = 0; k < n; ++k) a += u(r, k) * h_prev[k];
        return a;
    };
    ScalarStep s;
    s.i.resize(n); s.f.resize(n); s.g.resize(n); s.o.resize(n); s.c.resize(n); s.h.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        s.i[r] = 1.0 / (1.0 + std::exp(-preact(p.w_i, p.u_i, p.b_i, r)));
        s.f[r] = 1.0 / (1.0 + std::exp(-preact(p.w_f, p.u_f, p.b_f, r)));
        s.g[r] = std::tanh(preact(p.w_g, p.u_g, p.b_g, r));
        s.o[r] = 1.0 / (1.0 + std::exp(-preact(p.w_o, p.u_o, p.b_o, r)));
        s.c[r] = s.f[r] * c_prev[r] + s.i[r] * s.g[r];
        s.h[r] = s.o[r] * std::tanh(s.c[r]);
    }
    return s;
}

// Unrolled scalar forward pass of a whole model, one sample at a time.
std::vector<double> scalar_forward_sample(const LstmParams& p, const Tensor3& window,
                                          std::size_t sample) {
    const std::size_t timesteps = window.timesteps;
    auto run_stack = [&](const std::vector<LstmCellParams>& layers, bool reverse) {
        std::vector<std::vector<double>> sequence(timesteps);
        for (std::size_t t = 0; t < timesteps; ++t) {
            std::size_t src = reverse ? timesteps - 1 - t : t;
            sequence[t].resize(window.features);
            for (std::size_t f = 0; f < window.features; ++f)
                sequence[t][f] = window.at(sample, src, f);
        }
        std::vector<double> h_last;
        for (const LstmCellParams& cell : layers) {
            std::vector<double> h(cell.hidden(), 0.0), c(cell.hidden(), 0.0);
            std::vector<std::vector<double>> next(timesteps);
            for (std::size_t t = 0; t < timesteps; ++t) {
                ScalarStep s = scalar_cell_step(cell, sequence[t], h, c);
                h = s.h;
                c = s.c;
                next[t] = h;
            }
            sequence = std::move(next);
            h_last = h;
        }
        return h_last;
    };

    std::vector<double> rep = run_stack(p.layers, false);
    if (p.bidirectional()) {
        std::vector<double> back = run_stack(p.backward_layers, true);
        rep.insert(rep.end(), back.begin(), back.end());
    }

    std::vector<double> logits(p.num_classes());
    for (std::size_t c = 0; c < p.num_classes(); ++c) {
        double z = p.dense_b[c];
        for (std::size_t j = 0; j < rep.size(); ++j) z += p.dense_w(c, j) * rep[j];
        logits[c] = z;
    }
    return logits;
}

double loss_at(const LstmParams& p, const Tensor3& window, const std::vector<std::size_t>& labels) {
    return sparse_cce(forward_logits(p, window), labels).loss;
}

} // namespace

TEST_CASE("init_params is deterministic and shaped by the config") {
    NetworkShape shape = make_shape(Variant::stacked, {4, 3}, 5, 2);
    LstmParams a = init_params(shape, 42);
    LstmParams b = init_params(shape, 42);
    LstmParams c = init_params(shape, 43);

    REQUIRE(a.layers.size() == 2);
    CHECK(a.backward_layers.empty());
    CHECK(a.layers[0].w_i.rows() == 4);
    CHECK(a.layers[0].w_i.cols() == 5);
    CHECK(a.layers[1].w_i.rows() == 3);
    CHECK(a.layers[1].w_i.cols() == 4);
    CHECK(a.dense_w.rows() == 2);
    CHECK(a.dense_w.cols() == 3);

    auto pa = param_arrays(a), pb = param_arrays(b), pc = param_arrays(c);
    REQUIRE(pa.size() == pb.size());
    bool all_equal = true, any_diff_seed = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (*pa[i] != *pb[i]) all_equal = false;
        if (*pa[i] != *pc[i]) any_diff_seed = true;
    }
    CHECK(all_equal);
    CHECK(any_diff_seed);
}

TEST_CASE("forget-gate bias starts at exactly 1") {
    LstmParams p = init_params(make_shape(Variant::bidirectional, {6}, 4, 3), 7);
    REQUIRE(p.backward_layers.size() == 1);
    for (const auto* layer : {&p.layers[0], &p.backward_layers[0]}) {
        for (double v : layer->b_f) CHECK(v == 1.0);
        for (double v : layer->b_i) CHECK(v == 0.0);
        for (double v : layer->b_g) CHECK(v == 0.0);
        for (double v : layer->b_o) CHECK(v == 0.0);
    }
    for (double v : p.dense_b) CHECK(v == 0.0);
}

TEST_CASE("weight draws stay inside the glorot bound") {
    // 100 cells x 10x10 = 10^4 draws per gate matrix family
    double bound = std::sqrt(6.0 / (10 + 10));
    double max_seen = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        LstmParams p = init_params(make_shape(Variant::stacked, {10}, 10, 2), seed);
        for (double v : p.layers[0].w_i.data()) max_seen = std::max(max_seen, std::abs(v));
    }
    CHECK(max_seen <= bound);
    CHECK(max_seen > 0.9 * bound); // the draws should fill the interval
}

TEST_CASE("cell_step closed forms with zero weights") {
    LstmCellParams p;
    p.w_i = p.w_f = p.w_g = p.w_o = Matrix(1, 1);
    p.u_i = p.u_f = p.u_g = p.u_o = Matrix(1, 1);
    p.b_i = p.b_f = p.b_g = p.b_o = Vector{0.0};

    SUBCASE("all-zero state") {
        CellStep s = cell_step(p, {0.3}, {0.0}, {0.0});
        CHECK(s.cache.gate_i[0] == 0.5);
        CHECK(s.cache.gate_f[0] == 0.5);
        CHECK(s.cache.gate_o[0] == 0.5);
        CHECK(s.cache.gate_g[0] == 0.0);
        CHECK(s.c[0] == 0.0);
        CHECK(s.h[0] == 0.0);
    }
    SUBCASE("carried cell state halves through the open half-gate") {
        CellStep s = cell_step(p, {0.3}, {0.0}, {2.0});
        CHECK(s.c[0] == 1.0);
        CHECK(s.h[0] == doctest::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
    }
}

TEST_CASE("cell_step matches the scalar oracle") {
    Rng rng(11);
    LstmParams model = init_params(make_shape(Variant::stacked, {3}, 4, 2), 11);
    LstmCellParams& p = model.layers[0];

    std::vector<double> x(4), h(3), c(3);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : h) v = rng.uniform(-1, 1);
    for (auto& v : c) v = rng.uniform(-1, 1);

    CellStep got = cell_step(p, x, h, c);
    ScalarStep want = scalar_cell_step(p, x, h, c);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(std::abs(got.h[r] - want.h[r]) < 1e-12);
        CHECK(std::abs(got.c[r] - want.c[r]) < 1e-12);
        CHECK(std::abs(got.cache.gate_i[r] - want.i[r]) < 1e-12);
        CHECK(std::abs(got.cache.gate_f[r] - want.f[r]) < 1e-12);
        CHECK(std::abs(got.cache.gate_g[r] - want.g[r]) < 1e-12);
        CHECK(std::abs(got.cache.gate_o[r] - want.o[r]) < 1e-12);
    }
}

TEST_CASE("one timestep of a depth-1 model is a cell_step plus dense head") {
    Rng rng(12);
    LstmParams p = init_params(make_shape(Variant::stacked, {5}, 3, 4), 12);
    Tensor3 window = random_window(1, 1, 3, rng);

    Matrix logits = forward_logits(p, window);

    std::vector<double> x = {window.at(0, 0, 0), window.at(0, 0, 1), window.at(0, 0, 2)};
    CellStep s = cell_step(p.layers[0], x, Vector(5, 0.0), Vector(5, 0.0));
    for (std::size_t c = 0; c < 4; ++c) {
        double z = p.dense_b[c];
        for (std::size_t j = 0; j < 5; ++j) z += p.dense_w(c, j) * s.h[j];
        CHECK(std::abs(logits(0, c) - z) < 1e-12);
    }
}

TEST_CASE("stacked forward matches the unrolled scalar oracle") {
    Rng rng(13);
    LstmParams p = init_params(make_shape(Variant::stacked, {4, 3}, 5, 3), 13);
    Tensor3 window = random_window(3, 4, 5, rng);

    Matrix logits = forward_logits(p, window);
    for (std::size_t s = 0; s < 3; ++s) {
        std::vector<double> want = scalar_forward_sample(p, window, s);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::abs(logits(s, c) - want[c]) < 1e-10);
    }
}

TEST_CASE("bidirectional forward matches the unrolled scalar oracle") {
    Rng rng(14);
    LstmParams p = init_params(make_shape(Variant::bidirectional, {4}, 5, 3), 14);
    Tensor3 window = random_window(3, 4, 5, rng);

    Matrix logits = forward_logits(p, window);
    for (std::size_t s = 0; s < 3; ++s) {
        std::vector<double> want = scalar_forward_sample(p, window, s);
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::abs(logits(s, c) - want[c]) < 1e-10);
    }
}

TEST_CASE("constant sequences make both bidirectional halves equal") {
    // With identical forward and backward parameters, a time-symmetric input
    // must produce identical final states in both directions.
    LstmParams p = init_params(make_shape(Variant::bidirectional, {4}, 3, 2), 15);
    p.backward_layers[0] = p.layers[0];

    Tensor3 window(2, 5, 3);
    Rng rng(15);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t f = 0; f < 3; ++f) {
            double v = rng.uniform(-1, 1);
            for (std::size_t t = 0; t < 5; ++t) window.at(s, t, f) = v;
        }

    auto [logits, trace] = forward_sequence(p, window);
    REQUIRE(trace.rep.cols() == 8);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(trace.rep(s, j) == doctest::Approx(trace.rep(s, 4 + j)).epsilon(1e-12));
}

TEST_CASE("reversing the input swaps the bidirectional halves") {
    LstmParams p = init_params(make_shape(Variant::bidirectional, {4}, 3, 2), 16);
    p.backward_layers[0] = p.layers[0];

    Rng rng(16);
    Tensor3 window = random_window(2, 5, 3, rng);
    Tensor3 reversed = window;
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t f = 0; f < 3; ++f)
                reversed.at(s, t, f) = window.at(s, 4 - t, f);

    auto [l1, t1] = forward_sequence(p, window);
    auto [l2, t2] = forward_sequence(p, reversed);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(t1.rep(s, j) == doctest::Approx(t2.rep(s, 4 + j)).epsilon(1e-12));
            CHECK(t1.rep(s, 4 + j) == doctest::Approx(t2.rep(s, j)).epsilon(1e-12));
        }
}

TEST_CASE("zero dlogits produce exactly zero gradients") {
    Rng rng(17);
    LstmParams p = init_params(make_shape(Variant::stacked, {3, 2}, 4, 3), 17);
    Tensor3 window = random_window(2, 3, 4, rng);
    auto [logits, trace] = forward_sequence(p, window);

    ParamGrads g = backward_sequence(p, trace, Matrix(2, 3));
    for (const auto* arr : param_arrays(g))
        for (double v : *arr) CHECK(v == 0.0);
}

TEST_CASE("gradients are linear in dlogits") {
    Rng rng(18);
    LstmParams p = init_params(make_shape(Variant::bidirectional, {3}, 4, 3), 18);
    Tensor3 window = random_window(2, 3, 4, rng);
    auto [logits, trace] = forward_sequence(p, window);

    Matrix dlogits(2, 3);
    for (auto& v : dlogits.data()) v = rng.uniform(-1, 1);
    Matrix doubled = scale(dlogits, 2.0);

    ParamGrads g1 = backward_sequence(p, trace, dlogits);
    ParamGrads g2 = backward_sequence(p, trace, doubled);
    auto a1 = param_arrays(g1), a2 = param_arrays(g2);
    for (std::size_t i = 0; i < a1.size(); ++i) {
        REQUIRE(a1[i]->size() == a2[i]->size());
        for (std::size_t j = 0; j < a1[i]->size(); ++j)
            CHECK((*a2[i])[j] == doctest::Approx(2.0 * (*a1[i])[j]).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    auto run_check = [](const NetworkShape& shape, std::uint64_t seed) {
        Rng rng(seed);
        LstmParams p = init_params(shape, seed);
        Tensor3 window = random_window(2, 3, shape.input_width, rng);
        std::vector<std::size_t> labels(2);
        for (auto& l : labels) l = rng.index(shape.num_classes);

        auto [logits, trace] = forward_sequence(p, window);
        CceResult cce = sparse_cce(logits, labels);
        ParamGrads analytic = backward_sequence(p, trace, cce.dlogits);

        const double h = 1e-5;
        auto arrays = param_arrays(p);
        auto grads = param_arrays(analytic);
        for (std::size_t a = 0; a < arrays.size(); ++a) {
            for (std::size_t j = 0; j < arrays[a]->size(); ++j) {
                double saved = (*arrays[a])[j];
                (*arrays[a])[j] = saved + h;
                double up = loss_at(p, window, labels);
                (*arrays[a])[j] = saved - h;
                double down = loss_at(p, window, labels);
                (*arrays[a])[j] = saved;

                double numeric = (up - down) / (2 * h);
                double got = (*grads[a])[j];
                double rel = std::abs(got - numeric) / std::max(std::abs(got) + std::abs(numeric), 1e-6);
                CHECK(rel < 1e-4);
            }
        }
    };

    SUBCASE("stacked depth 2") { run_check(make_shape(Variant::stacked, {3, 2}, 3, 3), 19); }
    SUBCASE("bidirectional depth 1") {
        run_check(make_shape(Variant::bidirectional, {3}, 3, 3), 20);
    }
}

TEST_CASE("forward_logits and forward_sequence agree") {
    Rng rng(21);
    LstmParams p = init_params(make_shape(Variant::stacked, {4}, 3, 2), 21);
    Tensor3 window = random_window(3, 4, 3, rng);
    Matrix fast = forward_logits(p, window);
    auto [traced, trace] = forward_sequence(p, window);
    CHECK(fast == traced);
}

TEST_CASE("forward rejects mismatched feature width") {
    LstmParams p = init_params(make_shape(Variant::stacked, {4}, 3, 2), 22);
    Tensor3 wrong(2, 4, 5);
    CHECK_THROWS_AS(forward_logits(p, wrong), DimensionError);
}

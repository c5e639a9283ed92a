#include "mf/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "mf/block.hpp"
#include "mf/objectives.hpp"
#include "mf/rng.hpp"

namespace mf {

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Builds loss = sum(weights ∘ f(inputs)) and compares analytic input
/// gradients against central differences, elementwise.
double check_fn(const std::function<Var(Tape&, std::vector<Var>&)>& f, std::vector<Matrix> inputs, double h) {
    Matrix weights;
    {
        // One dry run to learn the output shape, then a fixed projection.
        Tape t;
        std::vector<Var> vars;
        for (const Matrix& m : inputs) vars.push_back(t.leaf(m, false));
        Var out = f(t, vars);
        Rng wr(9001);
        weights = wr.uniform_matrix(t.val(out).rows(), t.val(out).cols(), -1.0, 1.0);
    }
    auto eval = [&](bool with_grad, std::vector<Matrix>* grads) {
        Tape t;
        std::vector<Var> vars;
        vars.reserve(inputs.size());
        for (const Matrix& m : inputs) vars.push_back(t.leaf(m, with_grad));
        Var out = f(t, vars);
        Var loss = t.sum_all(t.hadamard_const(out, weights));
        const double lv = t.val(loss)(0, 0);
        if (with_grad) {
            t.backward(loss);
            for (size_t i = 0; i < vars.size(); ++i) {
                const Matrix& g = t.grad(vars[i]);
                (*grads)[i] = g.empty() ? Matrix(inputs[i].rows(), inputs[i].cols()) : g;
            }
        }
        return lv;
    };

    std::vector<Matrix> analytic(inputs.size());
    eval(true, &analytic);

    double worst = 0.0;
    for (size_t i = 0; i < inputs.size(); ++i)
        for (size_t k = 0; k < inputs[i].size(); ++k) {
            const double saved = inputs[i].data()[k];
            inputs[i].data()[k] = saved + h;
            const double up = eval(false, nullptr);
            inputs[i].data()[k] = saved - h;
            const double dn = eval(false, nullptr);
            inputs[i].data()[k] = saved;
            const double fd = (up - dn) / (2.0 * h);
            worst = std::max(worst, rel_err(analytic[i].data()[k], fd));
        }
    return worst;
}

Matrix positive_matrix(Rng& rng, int r, int c, double lo = 0.2, double hi = 1.5) {
    return rng.uniform_matrix(r, c, lo, hi);
}

double check_block(Rng& rng, double h) {
    const int n = 3, d = 8, heads = 2;
    BlockParams bp;
    bp.init(rng, d, heads, d, true);
    bp.cda.epsilon = 0.5;
    ParamRegistry reg;
    bp.register_into(reg, "block");

    Matrix xr = rng.uniform_matrix(n, d, -1.0, 1.0);
    Matrix xd = rng.uniform_matrix(n, d, -1.0, 1.0);
    Matrix weights = rng.uniform_matrix(n, d, -1.0, 1.0);

    auto eval = [&](bool with_grad, std::vector<Matrix>* grads) {
        Tape t;
        Var vr = t.leaf(xr, with_grad);
        Var vd = t.leaf(xd, with_grad);
        Var p = block_forward_t(t, vr, vd, bp).p;
        Var loss = t.sum_all(t.hadamard_const(p, weights));
        const double lv = t.val(loss)(0, 0);
        if (with_grad) {
            t.backward(loss);
            grads->clear();
            for (Param* pm : reg.all()) {
                const Matrix* g = t.param_grad(*pm);
                grads->push_back(g ? *g : Matrix(pm->value.rows(), pm->value.cols()));
            }
            const Matrix& gr = t.grad(vr);
            const Matrix& gd = t.grad(vd);
            grads->push_back(gr.empty() ? Matrix(n, d) : gr);
            grads->push_back(gd.empty() ? Matrix(n, d) : gd);
        }
        return lv;
    };

    std::vector<Matrix> analytic;
    eval(true, &analytic);

    auto fd_probe = [&](double* slot, double a) {
        const double saved = *slot;
        *slot = saved + h;
        const double up = eval(false, nullptr);
        *slot = saved - h;
        const double dn = eval(false, nullptr);
        *slot = saved;
        return rel_err(a, (up - dn) / (2.0 * h));
    };

    // Probe a deterministic subset of each parameter block plus the inputs;
    // probing every one of the ~10k entries would be minutes, not seconds.
    double worst = 0.0;
    Rng pick(rng.bits());
    const auto& params = reg.all();
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Matrix& value = params[pi]->value;
        const int probes = std::min<int>(3, static_cast<int>(value.size()));
        for (int q = 0; q < probes; ++q) {
            const size_t k = static_cast<size_t>(pick.uniform() * value.size());
            worst = std::max(worst, fd_probe(&value.data()[k], analytic[pi].data()[k]));
        }
    }
    for (size_t k = 0; k < xr.size(); ++k)
        worst = std::max(worst, fd_probe(&xr.data()[k], analytic[params.size()].data()[k]));
    for (size_t k = 0; k < xd.size(); ++k)
        worst = std::max(worst, fd_probe(&xd.data()[k], analytic[params.size() + 1].data()[k]));
    return worst;
}

} // namespace

std::vector<GradCheckResult> run_grad_checks(uint64_t seed, int rounds, double h) {
    std::vector<GradCheckResult> results;
    auto run = [&](const std::string& name, auto&& make_inputs, auto&& fn) {
        double worst = 0.0;
        for (int r = 0; r < rounds; ++r) {
            Rng rng = Rng(seed).fork(static_cast<uint64_t>(r * 1000 + results.size()));
            worst = std::max(worst, check_fn(fn, make_inputs(rng), h));
        }
        results.push_back({name, worst});
    };

    run(
        "matmul", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -1, 1), r.uniform_matrix(4, 2, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) { return t.matmul(v[0], v[1]); });
    run(
        "transpose", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) { return t.transpose(v[0]); });
    run(
        "softmax_rows", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 5, -2, 2)}; },
        [](Tape& t, std::vector<Var>& v) { return t.softmax_rows(v[0]); });
    run(
        "sym_normalize", [](Rng& r) { return std::vector<Matrix>{positive_matrix(r, 4, 4)}; },
        [](Tape& t, std::vector<Var>& v) { return t.sym_normalize(v[0]); });
    run(
        "layer_norm",
        [](Rng& r) {
            return std::vector<Matrix>{r.uniform_matrix(3, 6, -1, 1), r.uniform_matrix(1, 6, 0.5, 1.5),
                                       r.uniform_matrix(1, 6, -0.5, 0.5)};
        },
        [](Tape& t, std::vector<Var>& v) { return t.layer_norm(v[0], v[1], v[2]); });
    run(
        "gelu", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -2, 2)}; },
        [](Tape& t, std::vector<Var>& v) { return t.gelu(v[0]); });
    run(
        "sigmoid", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -2, 2)}; },
        [](Tape& t, std::vector<Var>& v) { return t.sigmoid(v[0]); });
    run(
        "log", [](Rng& r) { return std::vector<Matrix>{positive_matrix(r, 3, 4)}; },
        [](Tape& t, std::vector<Var>& v) { return t.log(v[0]); });
    run(
        "hadamard",
        [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -1, 1), r.uniform_matrix(3, 4, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) { return t.hadamard(v[0], v[1]); });
    run(
        "div_elem",
        [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -1, 1), positive_matrix(r, 3, 4, 0.5, 2.0)}; },
        [](Tape& t, std::vector<Var>& v) { return t.div_elem(v[0], v[1]); });
    run(
        "linear",
        [](Rng& r) {
            return std::vector<Matrix>{r.uniform_matrix(3, 4, -1, 1), r.uniform_matrix(4, 2, -1, 1),
                                       r.uniform_matrix(1, 2, -1, 1)};
        },
        [](Tape& t, std::vector<Var>& v) { return t.linear(v[0], v[1], v[2]); });
    run(
        "concat_slice",
        [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -1, 1), r.uniform_matrix(3, 2, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) { return t.slice_cols(t.concat_cols(v[0], v[1]), 1, 5); });
    run(
        "mean_all", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) { return t.mean_all(v[0]); });
    run(
        "clamp", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 4, 0.2, 0.8)}; },
        [](Tape& t, std::vector<Var>& v) { return t.clamp(v[0], 0.1, 0.9); });
    run(
        "gather_conv",
        [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(16, 2, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) {
            Im2colPlan plan = build_im2col(4, 4, 2, 3, 1, 1);
            return t.gather(v[0], plan.out_h * plan.out_w, 18, plan.idx);
        });
    run(
        "avgpool2x", [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(16, 3, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) { return t.avgpool2x(v[0], 4, 4); });
    run(
        "mul_col",
        [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(4, 3, -1, 1), r.uniform_matrix(4, 1, -1, 1)}; },
        [](Tape& t, std::vector<Var>& v) { return t.mul_col(v[0], v[1]); });
    run(
        "cda",
        [](Rng& r) {
            Matrix sr = softmax_rows(r.uniform_matrix(4, 4, -1, 1));
            Matrix sd = softmax_rows(r.uniform_matrix(4, 4, -1, 1));
            return std::vector<Matrix>{sr, sd, r.uniform_matrix(4, 3, -1, 1), r.uniform_matrix(4, 3, -1, 1)};
        },
        [](Tape& t, std::vector<Var>& v) {
            CdaConfig cfg;
            cfg.epsilon = 0.6;
            CdaVars cv = cross_diffusion_attention_t(t, v[0], v[1], v[2], v[3], cfg);
            return t.add(cv.m_rd, cv.m_dr);
        });
    run(
        "focal_regularization",
        [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(3, 3, 0.1, 0.9), r.uniform_matrix(3, 3, 0.1, 0.9)}; },
        [](Tape& t, std::vector<Var>& v) {
            Matrix y(3, 3);
            y(0, 0) = y(1, 1) = y(1, 2) = y(2, 0) = 1.0;
            return focal_regularization_t(t, v[0], v[1], y);
        });
    run(
        "pixel_position_aware",
        [](Rng& r) { return std::vector<Matrix>{r.uniform_matrix(4, 4, 0.1, 0.9)}; },
        [](Tape& t, std::vector<Var>& v) {
            Matrix y(4, 4);
            y(1, 1) = y(1, 2) = y(2, 1) = 1.0;
            return pixel_position_aware_loss_t(t, v[0], y, 3);
        });

    {
        double worst = 0.0;
        for (int r = 0; r < rounds; ++r) {
            Rng rng = Rng(seed).fork(777 + static_cast<uint64_t>(r));
            worst = std::max(worst, check_block(rng, h));
        }
        results.push_back({"full_block", worst});
    }
    return results;
}

} // namespace mf

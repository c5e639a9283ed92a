#include "mf/attention.hpp"

#include <cmath>

namespace mf {

namespace {

Matrix fanin_uniform(Rng& rng, int in, int out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return rng.uniform_matrix(in, out, -bound, bound);
}

} // namespace

void AttentionParams::init(Rng& rng, int d, int n_heads) {
    if (n_heads < 1 || d % n_heads != 0)
        throw ShapeError("AttentionParams: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(n_heads) + " heads");
    const int dh = d / n_heads;
    heads.resize(n_heads);
    for (auto& h : heads) {
        h.wq.value = fanin_uniform(rng, d, dh);
        h.wk.value = fanin_uniform(rng, d, dh);
        h.wv.value = fanin_uniform(rng, d, dh);
    }
    w_out.value = fanin_uniform(rng, d, d);
    b_out.value = Matrix(1, d);
}

void AttentionParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    for (size_t i = 0; i < heads.size(); ++i) {
        const std::string hp = prefix + ".h" + std::to_string(i);
        reg.add(heads[i].wq, hp + ".wq");
        reg.add(heads[i].wk, hp + ".wk");
        reg.add(heads[i].wv, hp + ".wv");
    }
    reg.add(w_out, prefix + ".w_out");
    reg.add(b_out, prefix + ".b_out");
}

void TwoLayerParams::init(Rng& rng, int in, int hidden, int out) {
    w1.value = fanin_uniform(rng, in, hidden);
    b1.value = Matrix(1, hidden);
    w2.value = fanin_uniform(rng, hidden, out);
    b2.value = Matrix(1, out);
}

void TwoLayerParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    reg.add(w1, prefix + ".w1");
    reg.add(b1, prefix + ".b1");
    reg.add(w2, prefix + ".w2");
    reg.add(b2, prefix + ".b2");
}

void CdaConfig::validate() const {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw DomainError("CdaConfig: epsilon must lie in [0,1], got " + std::to_string(epsilon));
    if (!diagnostic && (epsilon <= 0.0 || epsilon >= 1.0))
        throw DomainError("CdaConfig: epsilon must lie strictly inside (0,1) outside diagnostic mode");
}

namespace {

struct HeadOutputs {
    std::vector<Var> sims;   // per-head row-softmax similarities
    std::vector<Var> values; // per-head value projections
};

// Shared core: similarity from (query source, key source), values from the
// value source. For SA all three sources coincide.
AttnVars attend(Tape& t, Var x_query, Var x_key, Var x_value, const AttentionParams& p_query,
                const AttentionParams& p_key, const AttentionParams& p_value, const AttentionParams& p_out) {
    const int n_heads = p_query.n_heads();
    if (n_heads == 0) throw ShapeError("attention: no heads configured");
    if (t.val(x_query).cols() != p_query.model_width())
        throw ShapeError("attention: token width " + t.val(x_query).shape_str() + " does not match projections " +
                         p_query.heads[0].wq.value.shape_str());
    Var sim_sum{};
    Var mixed_cat{};
    Var value_cat{};
    for (int h = 0; h < n_heads; ++h) {
        Var q = t.matmul(x_query, t.param(p_query.heads[h].wq));
        Var k = t.matmul(x_key, t.param(p_key.heads[h].wk));
        Var v = t.matmul(x_value, t.param(p_value.heads[h].wv));
        Var s = t.softmax_rows(t.matmul(q, t.transpose(k)));
        Var m = t.matmul(s, v);
        sim_sum = h == 0 ? s : t.add(sim_sum, s);
        mixed_cat = h == 0 ? m : t.concat_cols(mixed_cat, m);
        value_cat = h == 0 ? v : t.concat_cols(value_cat, v);
    }
    AttnVars out;
    out.similarity = n_heads == 1 ? sim_sum : t.scale(sim_sum, 1.0 / n_heads);
    out.mixed = t.linear(mixed_cat, t.param(p_out.w_out), t.param(p_out.b_out));
    out.values = value_cat;
    return out;
}

} // namespace

AttnVars self_attention_t(Tape& t, Var x, const AttentionParams& p) {
    return attend(t, x, x, x, p, p, p, p);
}

std::pair<AttnVars, AttnVars> cross_attention_t(Tape& t, Var xr, Var xd, const AttentionParams& pr,
                                                const AttentionParams& pd) {
    if (t.val(xr).rows() != t.val(xd).rows())
        throw ShapeError("cross_attention: token count mismatch " + t.val(xr).shape_str() + " vs " +
                         t.val(xd).shape_str());
    // Query projection from one modality, key/value from the other; the
    // output projection follows the query side.
    AttnVars rd = attend(t, xr, xd, xd, pr, pd, pd, pr);
    AttnVars dr = attend(t, xd, xr, xr, pd, pr, pr, pd);
    return {rd, dr};
}

CdaVars cross_diffusion_attention_t(Tape& t, Var s_r, Var s_d, Var v_r, Var v_d, const CdaConfig& cfg) {
    cfg.validate();
    const Matrix& sr = t.val(s_r);
    const Matrix& sd = t.val(s_d);
    if (sr.rows() != sr.cols() || sd.rows() != sd.cols() || sr.rows() != sd.rows())
        throw ShapeError("cross_diffusion_attention: similarity shapes " + sr.shape_str() + " and " + sd.shape_str() +
                         " must be equal and square");
    const int n = sr.rows();
    if (t.val(v_r).rows() != n || t.val(v_d).rows() != n)
        throw ShapeError("cross_diffusion_attention: value rows must match token count " + std::to_string(n));

    CdaVars out;
    out.shat_r = t.sym_normalize(s_r);
    out.shat_d = t.sym_normalize(s_d);

    Var a{};
    if (cfg.a_supplied) {
        a = t.constant(*cfg.a_supplied);
    } else {
        a = t.scale(t.add(s_r, s_d), 0.5);
    }

    auto diffusion = [&](Var left, const std::optional<Matrix>& s0, Var right) {
        Var inner = left;
        if (s0) inner = t.matmul(left, t.constant(*s0));
        return t.matmul(inner, t.transpose(right));
    };
    Var diff_rd = diffusion(out.shat_r, cfg.s0_rd, out.shat_d);
    Var diff_dr = diffusion(out.shat_d, cfg.s0_dr, out.shat_r);

    // S = eps * Shat_l S0 Shat_r^T + (1-eps) * A; no softmax afterwards.
    out.s_rd = t.add(t.scale(diff_rd, cfg.epsilon), t.scale(a, 1.0 - cfg.epsilon));
    out.s_dr = t.add(t.scale(diff_dr, cfg.epsilon), t.scale(a, 1.0 - cfg.epsilon));
    out.m_rd = t.matmul(out.s_rd, v_d);
    out.m_dr = t.matmul(out.s_dr, v_r);
    return out;
}

Var combine_modality_t(Tape& t, Var m_self, Var m_cross, const TwoLayerParams& f) {
    if (t.val(m_self).rows() != t.val(m_cross).rows())
        throw ShapeError("combine_modality: row count mismatch " + t.val(m_self).shape_str() + " vs " +
                         t.val(m_cross).shape_str());
    Var cat = t.concat_cols(m_self, m_cross);
    Var z = t.linear(cat, t.param(f.w1), t.param(f.b1));
    return t.linear(z, t.param(f.w2), t.param(f.b2));
}

// ---- eager wrappers ----

namespace {

AttentionOutput finish(const Tape& t, const AttnVars& v) {
    AttentionOutput out{t.val(v.similarity), t.val(v.mixed)};
    if (!out.similarity.all_finite() || !out.mixed.all_finite())
        throw DomainError("attention: non-finite output");
    return out;
}

} // namespace

AttentionOutput self_attention(const Matrix& x, const AttentionParams& p) {
    Tape t;
    AttnVars v = self_attention_t(t, t.constant(x), p);
    return finish(t, v);
}

std::pair<AttentionOutput, AttentionOutput> cross_attention(const Matrix& xr, const Matrix& xd,
                                                            const AttentionParams& pr, const AttentionParams& pd) {
    Tape t;
    auto [rd, dr] = cross_attention_t(t, t.constant(xr), t.constant(xd), pr, pd);
    return {finish(t, rd), finish(t, dr)};
}

std::pair<AttentionOutput, AttentionOutput> cross_diffusion_attention(const Matrix& s_r, const Matrix& s_d,
                                                                      const Matrix& v_r, const Matrix& v_d,
                                                                      const CdaConfig& cfg) {
    Tape t;
    CdaVars v = cross_diffusion_attention_t(t, t.constant(s_r), t.constant(s_d), t.constant(v_r), t.constant(v_d), cfg);
    AttentionOutput rd{t.val(v.s_rd), t.val(v.m_rd)};
    AttentionOutput dr{t.val(v.s_dr), t.val(v.m_dr)};
    if (!rd.similarity.all_finite() || !rd.mixed.all_finite() || !dr.similarity.all_finite() ||
        !dr.mixed.all_finite())
        throw DomainError("cross_diffusion_attention: non-finite output");
    return {rd, dr};
}

Matrix combine_modality(const Matrix& m_self, const Matrix& m_cross, const TwoLayerParams& f) {
    Tape t;
    return t.val(combine_modality_t(t, t.constant(m_self), t.constant(m_cross), f));
}

Matrix positional_encoding_2d(int grid_h, int grid_w, int width) {
    if (width % 4 != 0)
        throw ShapeError("positional_encoding_2d: width " + std::to_string(width) + " must be divisible by 4");
    const int half = width / 2;
    const int pairs = half / 2;
    Matrix pe(grid_h * grid_w, width);
    for (int y = 0; y < grid_h; ++y)
        for (int x = 0; x < grid_w; ++x) {
            double* row = pe.row(y * grid_w + x);
            for (int i = 0; i < pairs; ++i) {
                const double freq = std::pow(10000.0, -2.0 * i / half);
                row[2 * i] = std::sin(y * freq);
                row[2 * i + 1] = std::cos(y * freq);
                row[half + 2 * i] = std::sin(x * freq);
                row[half + 2 * i + 1] = std::cos(x * freq);
            }
        }
    return pe;
}

} // namespace mf

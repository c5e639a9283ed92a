#include "mf/block.hpp"

#include <cmath>

namespace mf {

namespace {

Matrix fanin_uniform(Rng& rng, int in, int out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return rng.uniform_matrix(in, out, -bound, bound);
}

} // namespace

void LinearParams::init(Rng& rng, int in, int out) {
    w.value = fanin_uniform(rng, in, out);
    b.value = Matrix(1, out);
}

void LinearParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    reg.add(w, prefix + ".w");
    reg.add(b, prefix + ".b");
}

void LayerNormParams::init(int d) {
    gain.value = Matrix::full(1, d, 1.0);
    bias.value = Matrix(1, d);
}

void LayerNormParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    reg.add(gain, prefix + ".gain");
    reg.add(bias, prefix + ".bias");
}

void FfnParams::init(Rng& rng, int d, int hidden) {
    w1.value = fanin_uniform(rng, d, hidden);
    b1.value = Matrix(1, hidden);
    w2.value = fanin_uniform(rng, hidden, d);
    b2.value = Matrix(1, d);
}

void FfnParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    reg.add(w1, prefix + ".w1");
    reg.add(b1, prefix + ".b1");
    reg.add(w2, prefix + ".w2");
    reg.add(b2, prefix + ".b2");
}

Var ffn_t(Tape& t, Var x, const FfnParams& p) {
    Var z = t.gelu(t.linear(x, t.param(p.w1), t.param(p.b1)));
    return t.linear(z, t.param(p.w2), t.param(p.b2));
}

void CoarseBranchParams::init(Rng& rng, int d, int heads, int ffn_hidden) {
    unify.init(rng, 2 * d, d);
    sa.init(rng, d, heads);
    ln1.init(d);
    ln2.init(d);
    ffn.init(rng, d, ffn_hidden);
}

void CoarseBranchParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    unify.register_into(reg, prefix + ".unify");
    sa.register_into(reg, prefix + ".sa");
    ln1.register_into(reg, prefix + ".ln1");
    ln2.register_into(reg, prefix + ".ln2");
    ffn.register_into(reg, prefix + ".ffn");
}

void BlockParams::init(Rng& rng, int d, int heads, int ffn_hidden, bool coarse_branch) {
    use_coarse = coarse_branch;
    sa_r.init(rng, d, heads);
    sa_d.init(rng, d, heads);
    combine_r.init(rng, 2 * d, d, d);
    combine_d.init(rng, 2 * d, d, d);
    if (use_coarse) coarse.init(rng, d, heads, ffn_hidden);
    g.init(rng, use_coarse ? 3 * d : 2 * d, d);
    h.init(rng, 2 * d, d);
    ln.init(d);
    ffn.init(rng, d, ffn_hidden);
}

void BlockParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    sa_r.register_into(reg, prefix + ".sa_r");
    sa_d.register_into(reg, prefix + ".sa_d");
    combine_r.register_into(reg, prefix + ".combine_r");
    combine_d.register_into(reg, prefix + ".combine_d");
    if (use_coarse) coarse.register_into(reg, prefix + ".coarse");
    g.register_into(reg, prefix + ".g");
    h.register_into(reg, prefix + ".h");
    ln.register_into(reg, prefix + ".ln");
    ffn.register_into(reg, prefix + ".ffn");
}

BlockVars block_forward_t(Tape& t, Var xr, Var xd, const BlockParams& p) {
    require_same_shape(t.val(xr), t.val(xd), "block_forward");
    BlockVars out;
    out.sa_r = self_attention_t(t, xr, p.sa_r);
    out.sa_d = self_attention_t(t, xd, p.sa_d);
    out.cda = cross_diffusion_attention_t(t, out.sa_r.similarity, out.sa_d.similarity, out.sa_r.values,
                                          out.sa_d.values, p.cda);
    out.h_r = combine_modality_t(t, out.sa_r.mixed, out.cda.m_rd, p.combine_r);
    out.h_d = combine_modality_t(t, out.sa_d.mixed, out.cda.m_dr, p.combine_d);

    Var cat = t.concat_cols(out.h_r, out.h_d);
    if (p.use_coarse) {
        Var u = t.linear(t.concat_cols(xr, xd), t.param(p.coarse.unify.w), t.param(p.coarse.unify.b));
        Var z = t.add(u, self_attention_t(t, t.layer_norm(u, t.param(p.coarse.ln1.gain), t.param(p.coarse.ln1.bias)),
                                          p.coarse.sa)
                             .mixed);
        out.coarse =
            t.add(z, ffn_t(t, t.layer_norm(z, t.param(p.coarse.ln2.gain), t.param(p.coarse.ln2.bias)), p.coarse.ffn));
        cat = t.concat_cols(cat, out.coarse);
    }
    Var agg = t.linear(cat, t.param(p.g.w), t.param(p.g.b));
    Var normed = t.layer_norm(agg, t.param(p.ln.gain), t.param(p.ln.bias));
    Var residual = t.linear(t.concat_cols(xr, xd), t.param(p.h.w), t.param(p.h.b));
    out.p = t.add(ffn_t(t, normed, p.ffn), residual);
    return out;
}

void StackParams::init(Rng& rng, const StackConfig& cfg) {
    if (cfg.layers < 1) throw DomainError("StackParams: layer count must be >= 1");
    blocks.resize(cfg.layers);
    for (auto& b : blocks) {
        b.init(rng, cfg.width, cfg.heads, cfg.ffn_hidden, cfg.use_coarse);
        b.cda.epsilon = cfg.epsilon;
    }
    reproj_r.resize(cfg.layers - 1);
    reproj_d.resize(cfg.layers - 1);
    for (int i = 0; i < cfg.layers - 1; ++i) {
        reproj_r[i].init(rng, cfg.width, cfg.width);
        reproj_d[i].init(rng, cfg.width, cfg.width);
    }
}

void StackParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    for (size_t i = 0; i < blocks.size(); ++i) blocks[i].register_into(reg, prefix + ".block" + std::to_string(i));
    for (size_t i = 0; i < reproj_r.size(); ++i) {
        reproj_r[i].register_into(reg, prefix + ".reproj_r" + std::to_string(i));
        reproj_d[i].register_into(reg, prefix + ".reproj_d" + std::to_string(i));
    }
}

Var stack_forward_t(Tape& t, Var xr, Var xd, const StackParams& p) {
    if (p.blocks.empty()) throw DomainError("stack_forward: no layers");
    if (p.reproj_r.size() + 1 != p.blocks.size())
        throw DomainError("stack_forward: expected " + std::to_string(p.blocks.size() - 1) +
                          " re-projection pairs, got " + std::to_string(p.reproj_r.size()));
    Var fused{};
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        if (i > 0) {
            xr = t.linear(fused, t.param(p.reproj_r[i - 1].w), t.param(p.reproj_r[i - 1].b));
            xd = t.linear(fused, t.param(p.reproj_d[i - 1].w), t.param(p.reproj_d[i - 1].b));
        }
        fused = block_forward_t(t, xr, xd, p.blocks[i]).p;
    }
    return fused;
}

// ---- eager wrappers ----

namespace {

std::pair<Var, Var> token_inputs(Tape& t, const TokenSet& xr, const TokenSet& xd) {
    require_same_shape(xr.features, xr.positions, "TokenSet r");
    require_same_shape(xd.features, xd.positions, "TokenSet d");
    Var vr = t.constant(mf::add(xr.features, xr.positions));
    Var vd = t.constant(mf::add(xd.features, xd.positions));
    return {vr, vd};
}

} // namespace

Matrix block_forward(const TokenSet& xr, const TokenSet& xd, const BlockParams& p) {
    Tape t;
    auto [vr, vd] = token_inputs(t, xr, xd);
    return t.val(block_forward_t(t, vr, vd, p).p);
}

BlockTrace block_forward_trace(const TokenSet& xr, const TokenSet& xd, const BlockParams& p) {
    Tape t;
    auto [vr, vd] = token_inputs(t, xr, xd);
    BlockVars v = block_forward_t(t, vr, vd, p);
    BlockTrace tr;
    tr.s_r = t.val(v.sa_r.similarity);
    tr.s_d = t.val(v.sa_d.similarity);
    tr.shat_r = t.val(v.cda.shat_r);
    tr.shat_d = t.val(v.cda.shat_d);
    tr.s_rd = t.val(v.cda.s_rd);
    tr.s_dr = t.val(v.cda.s_dr);
    tr.m_r = t.val(v.sa_r.mixed);
    tr.m_d = t.val(v.sa_d.mixed);
    tr.m_rd = t.val(v.cda.m_rd);
    tr.m_dr = t.val(v.cda.m_dr);
    tr.h_r = t.val(v.h_r);
    tr.h_d = t.val(v.h_d);
    if (v.coarse.valid()) tr.coarse = t.val(v.coarse);
    tr.p = t.val(v.p);
    return tr;
}

Matrix stack_forward(const TokenSet& xr, const TokenSet& xd, const StackParams& p) {
    Tape t;
    auto [vr, vd] = token_inputs(t, xr, xd);
    return t.val(stack_forward_t(t, vr, vd, p));
}

// ---- patch embedding ----

void PatchEmbedParams::init(Rng& rng, int patch_size, int c_in, int d) {
    patch = patch_size;
    w.value = fanin_uniform(rng, patch_size * patch_size * c_in, d);
    b.value = Matrix(1, d);
}

void PatchEmbedParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    reg.add(w, prefix + ".w");
    reg.add(b, prefix + ".b");
}

Matrix patchify(const Matrix& grid, int h, int w, int c, int p) {
    if (grid.rows() != h * w || grid.cols() != c)
        throw ShapeError("patchify: grid " + grid.shape_str() + " does not match " + std::to_string(h) + "x" +
                         std::to_string(w) + "x" + std::to_string(c));
    auto idx = build_patchify(h, w, c, p);
    Matrix out((h / p) * (w / p), p * p * c);
    for (size_t k = 0; k < idx->size(); ++k) out.data()[k] = grid.data()[(*idx)[k]];
    return out;
}

Var embed_t(Tape& t, Var grid, int h, int w, int c, const PatchEmbedParams& pe) {
    const int p = pe.patch;
    if (h % p != 0 || w % p != 0)
        throw DomainError("embed: grid " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible into patches of " + std::to_string(p));
    Var tokens = t.gather(grid, (h / p) * (w / p), p * p * c, build_patchify(h, w, c, p));
    Var proj = t.linear(tokens, t.param(pe.w), t.param(pe.b));
    return t.add_const(proj, positional_encoding_2d(h / p, w / p, pe.w.value.cols()));
}

TokenSet embed(const Matrix& grid, int h, int w, int c, const PatchEmbedParams& pe, char modality) {
    const int p = pe.patch;
    if (h % p != 0 || w % p != 0)
        throw DomainError("embed: grid " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible into patches of " + std::to_string(p));
    TokenSet ts;
    ts.modality = modality;
    ts.features = linear(patchify(grid, h, w, c, p), pe.w.value, pe.b.value);
    ts.positions = positional_encoding_2d(h / p, w / p, pe.w.value.cols());
    return ts;
}

} // namespace mf

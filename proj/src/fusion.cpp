#include "mf/fusion.hpp"

#include <cmath>

namespace mf {

FusionStrategy parse_strategy(const std::string& name) {
    if (name == "add") return FusionStrategy::Add;
    if (name == "cat") return FusionStrategy::Cat;
    if (name == "transformer") return FusionStrategy::Transformer;
    if (name == "crossformer") return FusionStrategy::CrossFormer;
    if (name == "crossformer_cda") return FusionStrategy::CrossFormerCda;
    if (name == "mutualformer") return FusionStrategy::MutualFormer;
    throw DomainError("unknown fusion strategy '" + name +
                      "' (expected add|cat|transformer|crossformer|crossformer_cda|mutualformer)");
}

std::string strategy_name(FusionStrategy s) {
    switch (s) {
    case FusionStrategy::Add: return "add";
    case FusionStrategy::Cat: return "cat";
    case FusionStrategy::Transformer: return "transformer";
    case FusionStrategy::CrossFormer: return "crossformer";
    case FusionStrategy::CrossFormerCda: return "crossformer_cda";
    case FusionStrategy::MutualFormer: return "mutualformer";
    }
    return "?";
}

void TokenCodec::init(Rng& rng, const LevelGeometry& g, int width) {
    embed_r.init(rng, g.patch, g.channels, width);
    embed_d.init(rng, g.patch, g.channels, width);
    unembed.init(rng, width, g.patch * g.patch * g.channels);
    // The token path contributes a correction on top of the per-pixel sum
    // of the modality features; starting it at zero keeps early training on
    // the plain additive baseline.
    unembed.w.value = Matrix(width, g.patch * g.patch * g.channels);
    unembed.b.value = Matrix(1, g.patch * g.patch * g.channels);
}

void TokenCodec::register_into(ParamRegistry& reg, const std::string& prefix) {
    embed_r.register_into(reg, prefix + ".embed_r");
    embed_d.register_into(reg, prefix + ".embed_d");
    unembed.register_into(reg, prefix + ".unembed");
}

void Fusion::init(Rng& rng, const EncoderConfig& enc, const FusionConfig& cfg) {
    cfg_ = cfg;
    for (int li = 0; li < 4; ++li) {
        LevelGeometry g;
        g.grid = enc.image_size >> (li + 1);
        g.channels = enc.channels[li];
        g.token_grid = cfg.token_grids[li];
        if (g.token_grid < 1 || g.token_grid > g.grid)
            throw DomainError("fusion: token grid " + std::to_string(g.token_grid) + " invalid for level grid " +
                              std::to_string(g.grid));
        g.patch = cfg.patch_size > 0 ? cfg.patch_size : g.grid / g.token_grid;
        if (g.patch < 1) throw DomainError("fusion: derived patch size is zero");
        geom_[li] = g;
    }

    switch (cfg_.strategy) {
    case FusionStrategy::Add:
        break;
    case FusionStrategy::Cat:
        cat_proj_.resize(4);
        for (int li = 0; li < 4; ++li) cat_proj_[li].init(rng, 2 * geom_[li].channels, geom_[li].channels);
        break;
    case FusionStrategy::Transformer:
        transformer_.resize(4);
        for (int li = 0; li < 4; ++li) {
            transformer_[li].codec.init(rng, geom_[li], cfg_.width);
            transformer_[li].core.init(rng, cfg_.width, cfg_.heads, cfg_.ffn_hidden);
        }
        break;
    case FusionStrategy::CrossFormer:
    case FusionStrategy::CrossFormerCda:
        cross_.resize(4);
        for (int li = 0; li < 4; ++li) {
            CrossLevel& cl = cross_[li];
            cl.codec.init(rng, geom_[li], cfg_.width);
            cl.attn_r.init(rng, cfg_.width, cfg_.heads);
            cl.attn_d.init(rng, cfg_.width, cfg_.heads);
            cl.ln_r.init(cfg_.width);
            cl.ln_d.init(cfg_.width);
            cl.ffn_r.init(rng, cfg_.width, cfg_.ffn_hidden);
            cl.ffn_d.init(rng, cfg_.width, cfg_.ffn_hidden);
            cl.merge.init(rng, 2 * cfg_.width, cfg_.width);
        }
        break;
    case FusionStrategy::MutualFormer:
        mutual_.resize(4);
        for (int li = 0; li < 4; ++li) {
            mutual_[li].codec.init(rng, geom_[li], cfg_.width);
            StackConfig sc;
            sc.layers = cfg_.layers;
            sc.heads = cfg_.heads;
            sc.width = cfg_.width;
            sc.ffn_hidden = cfg_.ffn_hidden;
            sc.epsilon = cfg_.epsilon;
            sc.use_coarse = cfg_.use_coarse;
            mutual_[li].stack.init(rng, sc);
        }
        break;
    }
}

void Fusion::register_into(ParamRegistry& reg, const std::string& prefix) {
    for (int li = 0; li < 4; ++li) {
        const std::string lp = prefix + ".l" + std::to_string(li + 2);
        switch (cfg_.strategy) {
        case FusionStrategy::Add:
            break;
        case FusionStrategy::Cat:
            cat_proj_[li].register_into(reg, lp + ".proj");
            break;
        case FusionStrategy::Transformer:
            transformer_[li].codec.register_into(reg, lp + ".codec");
            transformer_[li].core.register_into(reg, lp + ".core");
            break;
        case FusionStrategy::CrossFormer:
        case FusionStrategy::CrossFormerCda: {
            CrossLevel& cl = cross_[li];
            cl.codec.register_into(reg, lp + ".codec");
            cl.attn_r.register_into(reg, lp + ".attn_r");
            cl.attn_d.register_into(reg, lp + ".attn_d");
            cl.ln_r.register_into(reg, lp + ".ln_r");
            cl.ln_d.register_into(reg, lp + ".ln_d");
            cl.ffn_r.register_into(reg, lp + ".ffn_r");
            cl.ffn_d.register_into(reg, lp + ".ffn_d");
            cl.merge.register_into(reg, lp + ".merge");
            break;
        }
        case FusionStrategy::MutualFormer:
            mutual_[li].codec.register_into(reg, lp + ".codec");
            mutual_[li].stack.register_into(reg, lp + ".stack");
            break;
        }
    }
}

Var Fusion::tokens_t(Tape& t, int li, const Grid& g, const PatchEmbedParams& pe) const {
    const LevelGeometry& geo = geom_[li];
    Grid resized = resize_nearest_t(t, g, geo.embed_grid(), geo.embed_grid());
    return embed_t(t, resized.v, geo.embed_grid(), geo.embed_grid(), geo.channels, pe);
}

Grid Fusion::untokens_t(Tape& t, int li, Var tokens, const LinearParams& unembed, const Grid& fr,
                        const Grid& fd) const {
    const LevelGeometry& geo = geom_[li];
    Var patches = t.linear(tokens, t.param(unembed.w), t.param(unembed.b));
    const int eg = geo.embed_grid();
    Var grid = t.gather(patches, eg * eg, geo.channels, build_unpatchify(eg, eg, geo.channels, geo.patch));
    Grid resized = resize_nearest_t(t, Grid{grid, eg, eg, geo.channels}, geo.grid, geo.grid);
    // Token-space fusion rides on the per-pixel modality sum, so patch
    // granularity never costs spatial detail.
    return Grid{t.add(t.add(fr.v, fd.v), resized.v), geo.grid, geo.grid, geo.channels};
}

namespace {

/// Head-averaged self similarity plus concatenated per-head values, without
/// the mixing product (the CDA mixer consumes these directly).
struct SimVals {
    Var similarity;
    Var values;
};

SimVals self_similarity_t(Tape& t, Var x, const AttentionParams& p) {
    Var sim_sum{}, value_cat{};
    const int n_heads = p.n_heads();
    for (int h = 0; h < n_heads; ++h) {
        Var q = t.matmul(x, t.param(p.heads[h].wq));
        Var k = t.matmul(x, t.param(p.heads[h].wk));
        Var v = t.matmul(x, t.param(p.heads[h].wv));
        Var s = t.softmax_rows(t.matmul(q, t.transpose(k)));
        sim_sum = h == 0 ? s : t.add(sim_sum, s);
        value_cat = h == 0 ? v : t.concat_cols(value_cat, v);
    }
    return {n_heads == 1 ? sim_sum : t.scale(sim_sum, 1.0 / n_heads), value_cat};
}

} // namespace

Grid Fusion::fuse_level_t(Tape& t, int li, const Grid& fr, const Grid& fd) const {
    switch (cfg_.strategy) {
    case FusionStrategy::Add:
        return Grid{t.add(fr.v, fd.v), fr.h, fr.w, fr.c};
    case FusionStrategy::Cat: {
        const LinearParams& p = cat_proj_[li];
        Var v = t.linear(t.concat_cols(fr.v, fd.v), t.param(p.w), t.param(p.b));
        return Grid{v, fr.h, fr.w, fr.c};
    }
    case FusionStrategy::Transformer: {
        const TransformerLevel& tl = transformer_[li];
        Var xr = tokens_t(t, li, fr, tl.codec.embed_r);
        Var xd = tokens_t(t, li, fd, tl.codec.embed_d);
        const CoarseBranchParams& cb = tl.core;
        Var u = t.linear(t.concat_cols(xr, xd), t.param(cb.unify.w), t.param(cb.unify.b));
        Var z = t.add(u, self_attention_t(t, t.layer_norm(u, t.param(cb.ln1.gain), t.param(cb.ln1.bias)), cb.sa).mixed);
        Var y = t.add(z, ffn_t(t, t.layer_norm(z, t.param(cb.ln2.gain), t.param(cb.ln2.bias)), cb.ffn));
        return untokens_t(t, li, y, tl.codec.unembed, fr, fd);
    }
    case FusionStrategy::CrossFormer:
    case FusionStrategy::CrossFormerCda: {
        const CrossLevel& cl = cross_[li];
        Var xr = tokens_t(t, li, fr, cl.codec.embed_r);
        Var xd = tokens_t(t, li, fd, cl.codec.embed_d);
        Var m_rd{}, m_dr{};
        if (cfg_.strategy == FusionStrategy::CrossFormer) {
            auto [rd, dr] = cross_attention_t(t, xr, xd, cl.attn_r, cl.attn_d);
            m_rd = rd.mixed;
            m_dr = dr.mixed;
        } else {
            // Same wiring with the feature-space mixer swapped for the
            // metric-space one.
            SimVals r = self_similarity_t(t, xr, cl.attn_r);
            SimVals d = self_similarity_t(t, xd, cl.attn_d);
            CdaConfig cda;
            cda.epsilon = cfg_.epsilon;
            CdaVars cv = cross_diffusion_attention_t(t, r.similarity, d.similarity, r.values, d.values, cda);
            m_rd = t.linear(cv.m_rd, t.param(cl.attn_r.w_out), t.param(cl.attn_r.b_out));
            m_dr = t.linear(cv.m_dr, t.param(cl.attn_d.w_out), t.param(cl.attn_d.b_out));
        }
        Var zr = t.add(xr, m_rd);
        Var zd = t.add(xd, m_dr);
        Var yr = t.add(zr, ffn_t(t, t.layer_norm(zr, t.param(cl.ln_r.gain), t.param(cl.ln_r.bias)), cl.ffn_r));
        Var yd = t.add(zd, ffn_t(t, t.layer_norm(zd, t.param(cl.ln_d.gain), t.param(cl.ln_d.bias)), cl.ffn_d));
        Var merged = t.linear(t.concat_cols(yr, yd), t.param(cl.merge.w), t.param(cl.merge.b));
        return untokens_t(t, li, merged, cl.codec.unembed, fr, fd);
    }
    case FusionStrategy::MutualFormer: {
        const MutualLevel& ml = mutual_[li];
        Var xr = tokens_t(t, li, fr, ml.codec.embed_r);
        Var xd = tokens_t(t, li, fd, ml.codec.embed_d);
        Var fused = stack_forward_t(t, xr, xd, ml.stack);
        return untokens_t(t, li, fused, ml.codec.unembed, fr, fd);
    }
    }
    throw DomainError("fuse_level: unreachable strategy");
}

std::array<Grid, 4> Fusion::forward_t(Tape& t, const std::array<Grid, 4>& f_r, const std::array<Grid, 4>& f_d) const {
    std::array<Grid, 4> out;
    for (int li = 0; li < 4; ++li) out[li] = fuse_level_t(t, li, f_r[li], f_d[li]);
    return out;
}

} // namespace mf

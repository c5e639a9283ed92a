#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mf/block.hpp"
#include "oracles.hpp"

using namespace mf;

namespace {

// Monolithic straight-line oracle for one block: the whole forward written
// out with local helpers and explicit loops, no reuse of the block's own
// modular pieces.
Matrix monolithic_block(const Matrix& xr, const Matrix& xd, const BlockParams& bp) {
    // Local bindings so unqualified calls resolve to the oracle versions.
    auto matmul = [](const Matrix& a, const Matrix& b) { return oracle::matmul(a, b); };
    auto softmax_rows = [](const Matrix& m) { return oracle::softmax_rows(m); };
    auto sym_normalize = [](const Matrix& m) { return oracle::sym_normalize(m); };
    auto transpose = [](const Matrix& m) { return oracle::transpose(m); };

    auto lin = [&](const Matrix& x, const Matrix& w, const Matrix& b) {
        Matrix out = matmul(x, w);
        for (int i = 0; i < out.rows(); ++i)
            for (int j = 0; j < out.cols(); ++j) out(i, j) += b(0, j);
        return out;
    };
    auto cat2 = [](const Matrix& a, const Matrix& b) {
        Matrix out(a.rows(), a.cols() + b.cols());
        for (int i = 0; i < a.rows(); ++i) {
            for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
            for (int j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
        }
        return out;
    };
    auto gelu_ml = [](Matrix x) {
        for (double& v : x.vec()) v = 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
        return x;
    };
    auto lnorm = [](const Matrix& x, const Matrix& gain, const Matrix& bias) {
        Matrix out(x.rows(), x.cols());
        for (int i = 0; i < x.rows(); ++i) {
            double mean = 0.0;
            for (int j = 0; j < x.cols(); ++j) mean += x(i, j);
            mean /= x.cols();
            double var = 0.0;
            for (int j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
            var /= x.cols();
            for (int j = 0; j < x.cols(); ++j)
                out(i, j) = (x(i, j) - mean) / std::sqrt(var + 1e-5) * gain(0, j) + bias(0, j);
        }
        return out;
    };
    auto mh_attention = [&](const Matrix& x, const AttentionParams& p, Matrix* sim_avg, Matrix* v_cat) {
        const int n = x.rows();
        Matrix cat(n, 0);
        Matrix vals(n, 0);
        Matrix sims(n, n);
        for (int h = 0; h < p.n_heads(); ++h) {
            const Matrix q = matmul(x, p.heads[h].wq.value);
            const Matrix k = matmul(x, p.heads[h].wk.value);
            const Matrix v = matmul(x, p.heads[h].wv.value);
            const Matrix s = softmax_rows(matmul(q, transpose(k)));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) sims(i, j) += s(i, j) / p.n_heads();
            cat = cat2(cat, matmul(s, v));
            vals = cat2(vals, v);
        }
        if (sim_avg) *sim_avg = sims;
        if (v_cat) *v_cat = vals;
        return lin(cat, p.w_out.value, p.b_out.value);
    };

    // Self-attention per modality.
    Matrix s_r, s_d, v_r, v_d;
    const Matrix m_r = mh_attention(xr, bp.sa_r, &s_r, &v_r);
    const Matrix m_d = mh_attention(xd, bp.sa_d, &s_d, &v_d);

    // Cross-diffusion: eps * Shat_r Shat_d^T + (1-eps) * (S_r + S_d)/2.
    const Matrix shat_r = sym_normalize(s_r);
    const Matrix shat_d = sym_normalize(s_d);
    const double eps = bp.cda.epsilon;
    const int n = xr.rows();
    Matrix s_rd(n, n), s_dr(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double diff_rd = 0.0, diff_dr = 0.0;
            for (int k = 0; k < n; ++k) {
                diff_rd += shat_r(i, k) * shat_d(j, k);
                diff_dr += shat_d(i, k) * shat_r(j, k);
            }
            const double a = 0.5 * (s_r(i, j) + s_d(i, j));
            s_rd(i, j) = eps * diff_rd + (1.0 - eps) * a;
            s_dr(i, j) = eps * diff_dr + (1.0 - eps) * a;
        }
    const Matrix m_rd = matmul(s_rd, v_d);
    const Matrix m_dr = matmul(s_dr, v_r);

    // Modality combines (two stacked linear maps).
    const Matrix h_r =
        lin(lin(cat2(m_r, m_rd), bp.combine_r.w1.value, bp.combine_r.b1.value), bp.combine_r.w2.value,
            bp.combine_r.b2.value);
    const Matrix h_d =
        lin(lin(cat2(m_d, m_dr), bp.combine_d.w1.value, bp.combine_d.b1.value), bp.combine_d.w2.value,
            bp.combine_d.b2.value);

    Matrix agg_in = cat2(h_r, h_d);
    if (bp.use_coarse) {
        const Matrix u = lin(cat2(xr, xd), bp.coarse.unify.w.value, bp.coarse.unify.b.value);
        const Matrix attn = mh_attention(lnorm(u, bp.coarse.ln1.gain.value, bp.coarse.ln1.bias.value), bp.coarse.sa,
                                         nullptr, nullptr);
        Matrix z = u;
        for (int i = 0; i < z.rows(); ++i)
            for (int j = 0; j < z.cols(); ++j) z(i, j) += attn(i, j);
        const Matrix ff = lin(gelu_ml(lin(lnorm(z, bp.coarse.ln2.gain.value, bp.coarse.ln2.bias.value),
                                          bp.coarse.ffn.w1.value, bp.coarse.ffn.b1.value)),
                              bp.coarse.ffn.w2.value, bp.coarse.ffn.b2.value);
        Matrix coarse = z;
        for (int i = 0; i < coarse.rows(); ++i)
            for (int j = 0; j < coarse.cols(); ++j) coarse(i, j) += ff(i, j);
        agg_in = cat2(agg_in, coarse);
    }

    const Matrix normed = lnorm(lin(agg_in, bp.g.w.value, bp.g.b.value), bp.ln.gain.value, bp.ln.bias.value);
    const Matrix ffn_out =
        lin(gelu_ml(lin(normed, bp.ffn.w1.value, bp.ffn.b1.value)), bp.ffn.w2.value, bp.ffn.b2.value);
    Matrix p = lin(cat2(xr, xd), bp.h.w.value, bp.h.b.value);
    for (int i = 0; i < p.rows(); ++i)
        for (int j = 0; j < p.cols(); ++j) p(i, j) += ffn_out(i, j);
    return p;
}

void zero_all(ParamRegistry& reg) {
    for (Param* p : reg.all())
        for (double& v : p->value.vec()) v = 0.0;
}

TokenSet tokens(Rng& rng, int n, int d, char tag) {
    return TokenSet{rng.uniform_matrix(n, d, -1, 1), rng.uniform_matrix(n, d, -0.5, 0.5), tag};
}

} // namespace

TEST_CASE("embed: single-cell grid gives projection plus position") {
    Rng rng(1);
    PatchEmbedParams pe;
    pe.init(rng, 1, 2, 8);
    const Matrix grid = rng.uniform_matrix(1, 2, -1, 1);
    const TokenSet ts = embed(grid, 1, 1, 2, pe, 'r');
    CHECK(ts.features.rows() == 1);
    CHECK(max_abs_diff(ts.features, linear(grid, pe.w.value, pe.b.value)) == 0.0);
    CHECK(max_abs_diff(ts.positions, positional_encoding_2d(1, 1, 8)) == 0.0);
}

TEST_CASE("embed: zero feature map leaves only positions after projection") {
    Rng rng(2);
    PatchEmbedParams pe;
    pe.init(rng, 2, 3, 8); // bias starts at zero
    const TokenSet ts = embed(Matrix(16, 3), 4, 4, 3, pe, 'd');
    for (double v : ts.features.vec()) CHECK(v == 0.0);
    Tape t;
    Var tok = embed_t(t, t.constant(Matrix(16, 3)), 4, 4, 3, pe);
    CHECK(max_abs_diff(t.val(tok), positional_encoding_2d(2, 2, 8)) == 0.0);
}

TEST_CASE("patchify matches an explicit slicing oracle") {
    // 4x4 grid, 1 channel, 2x2 patches -> 4 tokens of 4 pixels each.
    Matrix grid(16, 1);
    for (int i = 0; i < 16; ++i) grid(i, 0) = i;
    const Matrix tok = patchify(grid, 4, 4, 1, 2);
    CHECK(tok.rows() == 4);
    CHECK(tok.cols() == 4);
    // Token 0 covers pixels (0,0),(0,1),(1,0),(1,1) = flat 0,1,4,5.
    const double want0[4] = {0, 1, 4, 5};
    for (int j = 0; j < 4; ++j) CHECK(tok(0, j) == want0[j]);
    // Token 3 covers the bottom-right patch: 10,11,14,15.
    const double want3[4] = {10, 11, 14, 15};
    for (int j = 0; j < 4; ++j) CHECK(tok(3, j) == want3[j]);
    CHECK_THROWS_AS(patchify(grid, 4, 4, 1, 3), ShapeError);
}

TEST_CASE("block: residual-only when all maps are zero except h") {
    Rng rng(3);
    const int n = 3, d = 8;
    BlockParams bp;
    bp.init(rng, d, 2, d, true);
    bp.cda.epsilon = 0.5;
    ParamRegistry reg;
    bp.register_into(reg, "b");
    zero_all(reg);
    // h takes the left half of the concatenation.
    for (int i = 0; i < d; ++i) bp.h.w.value(i, i) = 1.0;

    TokenSet xr = tokens(rng, n, d, 'r');
    TokenSet xd = tokens(rng, n, d, 'd');
    const Matrix p = block_forward(xr, xd, bp);
    CHECK(max_abs_diff(p, add(xr.features, xr.positions)) < 1e-15);
}

TEST_CASE("block: duplicate modalities with shared params give H_r == H_d") {
    Rng rng(4);
    const int n = 4, d = 8;
    BlockParams bp;
    bp.init(rng, d, 2, d, true);
    bp.cda.epsilon = 0.6;
    bp.sa_d = bp.sa_r;
    bp.combine_d = bp.combine_r;
    TokenSet xr = tokens(rng, n, d, 'r');
    TokenSet xd = xr;
    xd.modality = 'd';
    const BlockTrace tr = block_forward_trace(xr, xd, bp);
    CHECK(max_abs_diff(tr.h_r, tr.h_d) == 0.0);
    CHECK(max_abs_diff(tr.s_rd, tr.s_dr) == 0.0);
}

TEST_CASE("block matches the monolithic oracle on 25 seeds") {
    for (uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(1000 + seed);
        const int n = 2 + static_cast<int>(seed % 4);
        const int d = 8;
        BlockParams bp;
        bp.init(rng, d, 2, d, seed % 2 == 0);
        bp.cda.epsilon = rng.uniform(0.1, 0.9);
        TokenSet xr = tokens(rng, n, d, 'r');
        TokenSet xd = tokens(rng, n, d, 'd');
        const Matrix got = block_forward(xr, xd, bp);
        const Matrix want =
            monolithic_block(add(xr.features, xr.positions), add(xd.features, xd.positions), bp);
        for (size_t i = 0; i < got.size(); ++i) {
            const double scale = std::max(1.0, std::abs(want.data()[i]));
            CHECK(std::abs(got.data()[i] - want.data()[i]) / scale < 1e-10);
        }
    }
}

TEST_CASE("block: permutation equivariance over tokens") {
    Rng rng(5);
    const int n = 5, d = 8;
    BlockParams bp;
    bp.init(rng, d, 2, d, true);
    bp.cda.epsilon = 0.4;
    TokenSet xr = tokens(rng, n, d, 'r');
    TokenSet xd = tokens(rng, n, d, 'd');
    const Matrix p = block_forward(xr, xd, bp);

    const int perm[5] = {3, 0, 4, 1, 2};
    auto permute = [&](const Matrix& m) {
        Matrix out(m.rows(), m.cols());
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) out(i, j) = m(perm[i], j);
        return out;
    };
    TokenSet pr{permute(xr.features), permute(xr.positions), 'r'};
    TokenSet pd{permute(xd.features), permute(xd.positions), 'd'};
    const Matrix pp = block_forward(pr, pd, bp);
    CHECK(max_abs_diff(pp, permute(p)) < 1e-11);
}

TEST_CASE("block: gradient reaches every parameter group") {
    Rng rng(6);
    const int n = 3, d = 8;
    BlockParams bp;
    bp.init(rng, d, 2, d, true);
    bp.cda.epsilon = 0.5;
    ParamRegistry reg;
    bp.register_into(reg, "b");

    Tape t;
    Var xr = t.leaf(rng.uniform_matrix(n, d, -1, 1), true);
    Var xd = t.leaf(rng.uniform_matrix(n, d, -1, 1), true);
    Var p = block_forward_t(t, xr, xd, bp).p;
    t.backward(t.sum_all(t.hadamard_const(p, rng.uniform_matrix(n, d, -1, 1))));
    for (const Param* pm : reg.all()) {
        INFO(pm->name);
        const Matrix* g = t.param_grad(*pm);
        REQUIRE(g != nullptr);
        double mag = 0.0;
        for (double v : g->vec()) mag += std::abs(v);
        CHECK(mag > 0.0);
    }
}

TEST_CASE("stack: T=1 equals a single block") {
    Rng rng(7);
    StackConfig sc;
    sc.layers = 1;
    sc.heads = 2;
    sc.width = 8;
    sc.ffn_hidden = 8;
    sc.epsilon = 0.5;
    StackParams sp;
    sp.init(rng, sc);
    TokenSet xr = tokens(rng, 3, 8, 'r');
    TokenSet xd = tokens(rng, 3, 8, 'd');
    CHECK(max_abs_diff(stack_forward(xr, xd, sp), block_forward(xr, xd, sp.blocks[0])) == 0.0);
}

TEST_CASE("stack: pure-residual second layer reproduces T=1") {
    Rng rng(8);
    StackConfig sc;
    sc.layers = 2;
    sc.heads = 2;
    sc.width = 8;
    sc.ffn_hidden = 8;
    sc.epsilon = 0.5;
    StackParams sp;
    sp.init(rng, sc);

    // Layer 2: everything zero except h = left-block identity; the
    // re-projection for the r stream is the identity.
    ParamRegistry reg2;
    sp.blocks[1].register_into(reg2, "l1");
    zero_all(reg2);
    for (int i = 0; i < 8; ++i) sp.blocks[1].h.w.value(i, i) = 1.0;
    sp.reproj_r[0].w.value = Matrix::identity(8);
    sp.reproj_r[0].b.value = Matrix(1, 8);
    sp.reproj_d[0].w.value = Matrix(8, 8);
    sp.reproj_d[0].b.value = Matrix(1, 8);

    TokenSet xr = tokens(rng, 4, 8, 'r');
    TokenSet xd = tokens(rng, 4, 8, 'd');
    CHECK(max_abs_diff(stack_forward(xr, xd, sp), block_forward(xr, xd, sp.blocks[0])) < 1e-15);
}

TEST_CASE("stack: T=3 equals sequential composition of blocks") {
    Rng rng(9);
    StackConfig sc;
    sc.layers = 3;
    sc.heads = 2;
    sc.width = 8;
    sc.ffn_hidden = 8;
    sc.epsilon = 0.5;
    StackParams sp;
    sp.init(rng, sc);
    TokenSet xr = tokens(rng, 3, 8, 'r');
    TokenSet xd = tokens(rng, 3, 8, 'd');
    const Matrix got = stack_forward(xr, xd, sp);

    Matrix fused = block_forward(xr, xd, sp.blocks[0]);
    for (int layer = 1; layer < 3; ++layer) {
        const Matrix next_r = linear(fused, sp.reproj_r[layer - 1].w.value, sp.reproj_r[layer - 1].b.value);
        const Matrix next_d = linear(fused, sp.reproj_d[layer - 1].w.value, sp.reproj_d[layer - 1].b.value);
        TokenSet tr{next_r, Matrix(next_r.rows(), next_r.cols()), 'r'};
        TokenSet td{next_d, Matrix(next_d.rows(), next_d.cols()), 'd'};
        fused = block_forward(tr, td, sp.blocks[layer]);
    }
    CHECK(max_abs_diff(got, fused) == 0.0);
}

TEST_CASE("stack rejects mismatched layer parameters") {
    Rng rng(10);
    StackConfig sc;
    sc.layers = 2;
    sc.heads = 2;
    sc.width = 8;
    StackParams sp;
    sp.init(rng, sc);
    sp.reproj_r.pop_back();
    TokenSet xr = tokens(rng, 3, 8, 'r');
    TokenSet xd = tokens(rng, 3, 8, 'd');
    CHECK_THROWS_AS(stack_forward(xr, xd, sp), DomainError);
}

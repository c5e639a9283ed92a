#include "mf/decoder.hpp"

namespace mf {

void DecoderPhaseParams::init(Rng& rng, const std::array<int, 4>& channels) {
    // merge index 0 handles level 4 (deeper neighbor level 5), and so on up.
    for (int i = 0; i < 3; ++i) {
        const int level_idx = 2 - i; // fused[] index of the level being produced
        const int in = channels[level_idx + 1] + channels[level_idx];
        merge_a[i].init(rng, 3, in, channels[level_idx], 1, 1);
        merge_b[i].init(rng, 3, channels[level_idx], channels[level_idx], 1, 1);
    }
    final_conv.init(rng, 3, channels[0], channels[0], 1, 1);
    final_head.init(rng, channels[0], 1);
}

void DecoderPhaseParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    for (int i = 0; i < 3; ++i) {
        const std::string lp = prefix + ".merge" + std::to_string(4 - i);
        merge_a[i].register_into(reg, lp + ".a");
        merge_b[i].register_into(reg, lp + ".b");
    }
    final_conv.register_into(reg, prefix + ".final_conv");
    final_head.register_into(reg, prefix + ".final_head");
}

void DecoderParams::init(Rng& rng, const std::array<int, 4>& channels) {
    phase1.init(rng, channels);
    phase2.init(rng, channels);
    for (int i = 0; i < 4; ++i) level_heads[i].init(rng, channels[i], 1);
}

void DecoderParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    phase1.register_into(reg, prefix + ".phase1");
    phase2.register_into(reg, prefix + ".phase2");
    for (int i = 0; i < 4; ++i) level_heads[i].register_into(reg, prefix + ".head_l" + std::to_string(i + 2));
}

namespace {

struct PhaseOut {
    Var pred;                     // (s*s) x 1 sigmoid
    std::array<Grid, 4> levels;   // decoded feature per level (index 3 = raw level-5 input)
};

PhaseOut phase_forward(Tape& t, const std::array<Grid, 4>& fused, const DecoderPhaseParams& p, int image_size) {
    PhaseOut out;
    Grid x = fused[3];
    out.levels[3] = x;
    for (int i = 0; i < 3; ++i) {
        const int level_idx = 2 - i;
        Grid up = upsample2x_t(t, x);
        Grid cat{t.concat_cols(up.v, fused[level_idx].v), up.h, up.w, up.c + fused[level_idx].c};
        Grid a = conv2d_t(t, cat, p.merge_a[i]);
        a.v = t.gelu(a.v);
        x = conv2d_t(t, a, p.merge_b[i]);
        x.v = t.gelu(x.v);
        out.levels[level_idx] = x;
    }
    // Refine at level-2 resolution, predict, then upsample the probability
    // map to full resolution (sigmoid and nearest upsampling commute).
    Grid refined = conv2d_t(t, x, p.final_conv);
    refined.v = t.gelu(refined.v);
    Var prob = t.sigmoid(t.linear(refined.v, t.param(p.final_head.w), t.param(p.final_head.b)));
    Grid pred{prob, refined.h, refined.w, 1};
    while (pred.h < image_size) pred = upsample2x_t(t, pred);
    if (pred.h != image_size)
        throw ShapeError("decoder: expected full resolution " + std::to_string(image_size) + ", got " +
                         std::to_string(pred.h));
    out.pred = pred.v;
    return out;
}

Var upsample_to_full(Tape& t, Grid g, int image_size) {
    while (g.h < image_size) g = upsample2x_t(t, g);
    return g.v;
}

} // namespace

DecoderOut decoder_forward_t(Tape& t, const std::array<Grid, 4>& fused, const DecoderParams& p, int image_size) {
    PhaseOut one = phase_forward(t, fused, p.phase1, image_size);

    // Phase-1 prediction, downsampled per level, gates the second pass.
    std::array<Grid, 4> gated;
    Grid guide{one.pred, image_size, image_size, 1};
    for (int li = 0; li < 4; ++li) {
        while (guide.h > fused[li].h) guide = avgpool2x_t(t, guide);
        gated[li] = Grid{t.mul_col(fused[li].v, guide.v), fused[li].h, fused[li].w, fused[li].c};
    }
    PhaseOut two = phase_forward(t, gated, p.phase2, image_size);

    DecoderOut out;
    out.pred1 = one.pred;
    out.pred2 = two.pred;
    for (int li = 0; li < 4; ++li) {
        Var logits = t.linear(two.levels[li].v, t.param(p.level_heads[li].w), t.param(p.level_heads[li].b));
        Var prob = t.sigmoid(logits);
        out.level_preds[li] =
            upsample_to_full(t, Grid{prob, two.levels[li].h, two.levels[li].w, 1}, image_size);
    }
    return out;
}

} // namespace mf

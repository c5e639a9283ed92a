#include "mf/encoder.hpp"

namespace mf {

void EncoderTower::init(Rng& rng, int in_channels, const EncoderConfig& cfg) {
    int c_in = in_channels;
    for (int l = 0; l < 4; ++l) {
        convs[l].init(rng, 3, c_in, cfg.channels[l], 2, 1);
        heads[l].init(rng, cfg.channels[l], 1);
        c_in = cfg.channels[l];
    }
}

void EncoderTower::register_into(ParamRegistry& reg, const std::string& prefix) {
    for (int l = 0; l < 4; ++l) {
        const std::string lp = prefix + ".l" + std::to_string(l + 2);
        convs[l].register_into(reg, lp + ".conv");
        heads[l].register_into(reg, lp + ".head");
    }
}

void Encoder::init(Rng& rng, const EncoderConfig& config) {
    cfg = config;
    rgb.init(rng, 3, cfg);
    dep.init(rng, 1, cfg);
}

void Encoder::register_into(ParamRegistry& reg, const std::string& prefix) {
    rgb.register_into(reg, prefix + ".rgb");
    dep.register_into(reg, prefix + ".dep");
}

namespace {

void tower_forward(Tape& t, Var input, int image_size, int in_channels, const EncoderTower& tower,
                   std::array<Grid, 4>& feats, std::array<Var, 4>& probs) {
    Grid x{input, image_size, image_size, in_channels};
    for (int l = 0; l < 4; ++l) {
        x = conv2d_t(t, x, tower.convs[l]);
        x.v = t.gelu(x.v);
        feats[l] = x;
        probs[l] = t.sigmoid(t.linear(x.v, t.param(tower.heads[l].w), t.param(tower.heads[l].b)));
    }
}

} // namespace

EncoderOut encoder_forward_t(Tape& t, Var rgb, Var depth, const Encoder& enc) {
    const int s = enc.cfg.image_size;
    if (t.val(rgb).rows() != s * s || t.val(rgb).cols() != 3)
        throw ShapeError("encoder: rgb grid must be " + std::to_string(s * s) + "x3, got " + t.val(rgb).shape_str());
    if (t.val(depth).rows() != s * s || t.val(depth).cols() != 1)
        throw ShapeError("encoder: depth grid must be " + std::to_string(s * s) + "x1, got " +
                         t.val(depth).shape_str());
    EncoderOut out;
    tower_forward(t, rgb, s, 3, enc.rgb, out.f_r, out.p_r);
    tower_forward(t, depth, s, 1, enc.dep, out.f_d, out.p_d);
    return out;
}

} // namespace mf

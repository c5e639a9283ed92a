#pragma once

#include <array>

#include "mf/conv.hpp"

namespace mf {

struct EncoderConfig {
    int image_size = 64;
    std::array<int, 4> channels = {8, 12, 16, 20}; // levels 2..5
};

/// One modality's 4-level tower: stride-2 3x3 convs with GELU, plus a
/// 1-channel sigmoid head per level whose output feeds the focal
/// regularization only.
struct EncoderTower {
    std::array<ConvParams, 4> convs;
    std::array<LinearParams, 4> heads;

    void init(Rng& rng, int in_channels, const EncoderConfig& cfg);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

struct Encoder {
    EncoderConfig cfg;
    EncoderTower rgb, dep;

    void init(Rng& rng, const EncoderConfig& config);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

struct EncoderOut {
    std::array<Grid, 4> f_r, f_d; // level features, spatial size halving per level
    std::array<Var, 4> p_r, p_d;  // per-level foreground probability maps, (h*w) x 1
};

EncoderOut encoder_forward_t(Tape& t, Var rgb, Var depth, const Encoder& enc);

} // namespace mf

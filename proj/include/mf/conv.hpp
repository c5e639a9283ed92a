#pragma once

#include "mf/block.hpp"

namespace mf {

/// A feature map on the tape: (h*w) x c matrix, pixel-major rows.
struct Grid {
    Var v;
    int h = 0, w = 0, c = 0;
};

struct ConvParams {
    Param w; // (k*k*c_in) x c_out
    Param b; // 1 x c_out
    int k = 3, stride = 1, pad = 1;
    int c_in = 0, c_out = 0;

    void init(Rng& rng, int kernel, int in, int out, int stride_ = 1, int pad_ = 1);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

Grid conv2d_t(Tape& t, const Grid& x, const ConvParams& p);
Grid upsample2x_t(Tape& t, const Grid& x);
Grid avgpool2x_t(Tape& t, const Grid& x);
Grid resize_nearest_t(Tape& t, const Grid& x, int h_out, int w_out);

} // namespace mf

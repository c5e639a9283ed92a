#include "mf/conv.hpp"

#include <cmath>

namespace mf {

void ConvParams::init(Rng& rng, int kernel, int in, int out, int stride_, int pad_) {
    k = kernel;
    stride = stride_;
    pad = pad_;
    c_in = in;
    c_out = out;
    const int fan_in = k * k * in;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    w.value = rng.uniform_matrix(fan_in, out, -bound, bound);
    b.value = Matrix(1, out);
}

void ConvParams::register_into(ParamRegistry& reg, const std::string& prefix) {
    reg.add(w, prefix + ".w");
    reg.add(b, prefix + ".b");
}

Grid conv2d_t(Tape& t, const Grid& x, const ConvParams& p) {
    if (x.c != p.c_in)
        throw ShapeError("conv2d: input has " + std::to_string(x.c) + " channels, kernel expects " +
                         std::to_string(p.c_in));
    const Im2colPlan plan = build_im2col(x.h, x.w, x.c, p.k, p.stride, p.pad);
    Var cols = t.gather(x.v, plan.out_h * plan.out_w, p.k * p.k * p.c_in, plan.idx);
    Var out = t.linear(cols, t.param(p.w), t.param(p.b));
    return Grid{out, plan.out_h, plan.out_w, p.c_out};
}

Grid upsample2x_t(Tape& t, const Grid& x) {
    Var v = t.gather(x.v, 4 * x.h * x.w, x.c, build_upsample2x(x.h, x.w, x.c));
    return Grid{v, 2 * x.h, 2 * x.w, x.c};
}

Grid avgpool2x_t(Tape& t, const Grid& x) {
    return Grid{t.avgpool2x(x.v, x.h, x.w), x.h / 2, x.w / 2, x.c};
}

Grid resize_nearest_t(Tape& t, const Grid& x, int h_out, int w_out) {
    if (h_out == x.h && w_out == x.w) return x;
    Var v = t.gather(x.v, h_out * w_out, x.c, build_resize_nearest(x.h, x.w, x.c, h_out, w_out));
    return Grid{v, h_out, w_out, x.c};
}

} // namespace mf

#include "mf/synth.hpp"

#include <cmath>

namespace mf {

bool ShapeSpec::contains(double x, double y) const {
    switch (kind) {
    case Ellipse: {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
    case Rect:
        return std::abs(x - cx) <= rx && std::abs(y - cy) <= ry;
    case Triangle: {
        // Vertices: apex above center (with skew), base corners below.
        const double ax = cx + skew, ay = cy - ry;
        const double bx = cx - rx, by = cy + ry;
        const double ccx = cx + rx, ccy = cy + ry;
        auto side = [](double px, double py, double x1, double y1, double x2, double y2) {
            return (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1);
        };
        const double d1 = side(x, y, ax, ay, bx, by);
        const double d2 = side(x, y, bx, by, ccx, ccy);
        const double d3 = side(x, y, ccx, ccy, ax, ay);
        const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
        const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
        return !(has_neg && has_pos);
    }
    }
    return false;
}

SaliencySample render_sample(const SampleSpec& spec) {
    const int s = spec.size;
    SaliencySample out;
    out.size = s;
    out.rgb = Matrix(s * s, 3);
    out.depth = Matrix(s * s, 1);
    out.mask = Matrix(s, s);

    Rng noise(spec.noise_seed);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const int pix = y * s + x;
            const double tex = 0.12 * std::sin(spec.bg_freq_x * x + spec.bg_phase_x) *
                               std::sin(spec.bg_freq_y * y + spec.bg_phase_y);
            double rgbv[3];
            for (int c = 0; c < 3; ++c) rgbv[c] = spec.bg_color[c] + tex + noise.uniform(-0.08, 0.08);
            // Depth is deliberately low-contrast: neither channel resolves
            // saliency alone (RGB distractors share the salient palette,
            // depth carries heavy noise), so fusion quality matters.
            double depth = spec.bg_depth + 0.10 * (static_cast<double>(y) / s) + noise.uniform(-0.30, 0.30);
            bool in_mask = false;

            for (const ShapeSpec& d : spec.distractors)
                if (d.contains(x, y))
                    for (int c = 0; c < 3; ++c) rgbv[c] = d.color[c];
            for (const ShapeSpec& sh : spec.salient)
                if (sh.contains(x, y)) {
                    for (int c = 0; c < 3; ++c) rgbv[c] = sh.color[c];
                    depth = sh.depth + noise.uniform(-0.30, 0.30);
                    in_mask = true;
                }

            for (int c = 0; c < 3; ++c) {
                const double v = rgbv[c] + noise.uniform(-0.03, 0.03);
                out.rgb(pix, c) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            }
            out.depth(pix, 0) = depth < 0.0 ? 0.0 : (depth > 1.0 ? 1.0 : depth);
            out.mask(y, x) = in_mask ? 1.0 : 0.0;
        }
    return out;
}

namespace {

ShapeSpec random_shape(Rng& rng, int size, bool salient) {
    ShapeSpec sh;
    const int kinds = 3;
    sh.kind = static_cast<ShapeSpec::Kind>(rng.uniform_int(0, kinds - 1));
    sh.cx = rng.uniform(0.22, 0.78) * size;
    sh.cy = rng.uniform(0.22, 0.78) * size;
    sh.rx = rng.uniform(0.09, 0.20) * size;
    sh.ry = rng.uniform(0.09, 0.20) * size;
    sh.skew = rng.uniform(-0.05, 0.05) * size;
    for (double& c : sh.color) c = rng.uniform(0.0, 1.0);
    sh.depth = salient ? rng.uniform(0.55, 0.80) : 0.0;
    return sh;
}

} // namespace

SampleSpec random_sample_spec(uint64_t seed, int index, int size) {
    Rng rng = Rng(seed).fork(static_cast<uint64_t>(index));
    SampleSpec spec;
    spec.size = size;
    spec.noise_seed = rng.bits();
    for (double& c : spec.bg_color) c = rng.uniform(0.25, 0.75);
    spec.bg_freq_x = rng.uniform(0.15, 0.6);
    spec.bg_freq_y = rng.uniform(0.15, 0.6);
    spec.bg_phase_x = rng.uniform(0.0, 6.283);
    spec.bg_phase_y = rng.uniform(0.0, 6.283);
    spec.bg_depth = rng.uniform(0.15, 0.35);

    // Salient shapes are camouflaged toward the background palette, so their
    // outline is faint in RGB and their depth boundary drowns in noise;
    // distractors are vividly colored but flat. Neither channel resolves
    // saliency alone.
    const int n_salient = rng.uniform_int(1, 3);
    for (int i = 0; i < n_salient; ++i) {
        ShapeSpec sh = random_shape(rng, size, true);
        const double blend = rng.uniform(0.25, 0.55);
        for (int c = 0; c < 3; ++c) sh.color[c] = spec.bg_color[c] + blend * (sh.color[c] - spec.bg_color[c]);
        spec.salient.push_back(sh);
    }
    const int n_distract = rng.uniform_int(1, 3);
    for (int i = 0; i < n_distract; ++i) spec.distractors.push_back(random_shape(rng, size, false));
    return spec;
}

std::vector<SaliencySample> synth_dataset(uint64_t seed, int count, int size) {
    if (size < 32) throw DomainError("synth_dataset: size must be >= 32, got " + std::to_string(size));
    if (count < 1) throw DomainError("synth_dataset: count must be >= 1");
    std::vector<SaliencySample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(render_sample(random_sample_spec(seed, i, size)));
    return out;
}

} // namespace mf

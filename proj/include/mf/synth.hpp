#pragma once

#include <vector>

#include "mf/matrix.hpp"
#include "mf/rng.hpp"

namespace mf {

/// One RGB-D training/eval sample at a shared square resolution.
struct SaliencySample {
    int size = 0;
    Matrix rgb;   // (size*size) x 3 grid, rows pixel-major
    Matrix depth; // (size*size) x 1
    Matrix mask;  // size x size, binary

    Matrix mask_flat() const { return Matrix(size * size, 1, mask.vec()); }
};

struct ShapeSpec {
    enum Kind { Ellipse, Rect, Triangle } kind = Ellipse;
    double cx = 0, cy = 0;   // center, pixels
    double rx = 0, ry = 0;   // half extents
    double skew = 0;         // triangle apex offset
    double color[3] = {0, 0, 0};
    double depth = 0.8;      // nearness in [0,1], higher = closer

    bool contains(double x, double y) const;
};

/// Full recipe for one sample; render_sample is deterministic in it.
struct SampleSpec {
    int size = 0;
    uint64_t noise_seed = 0;
    double bg_color[3] = {0.5, 0.5, 0.5};
    double bg_freq_x = 0.3, bg_freq_y = 0.2, bg_phase_x = 0.0, bg_phase_y = 0.0;
    double bg_depth = 0.25;
    std::vector<ShapeSpec> salient;
    std::vector<ShapeSpec> distractors; // drawn in RGB only, at background depth
};

SaliencySample render_sample(const SampleSpec& spec);

/// Random recipe; sample i is the same for any count >= i+1.
SampleSpec random_sample_spec(uint64_t seed, int index, int size);

/// Deterministic synthetic dataset: 1-3 salient shapes nearer than the
/// background in depth, textured RGB with color distractors, exact masks.
std::vector<SaliencySample> synth_dataset(uint64_t seed, int count, int size);

} // namespace mf

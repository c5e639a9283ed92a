#pragma once

#include <array>

#include "mf/conv.hpp"

namespace mf {

/// One decoding phase: top-down pathway that upsamples the deeper map,
/// concatenates the skip from the fused features and applies two 3x3 convs
/// per level, then predicts a full-resolution map through a final conv and
/// 1-channel head.
struct DecoderPhaseParams {
    std::array<ConvParams, 3> merge_a, merge_b; // levels 4, 3, 2
    ConvParams final_conv;
    LinearParams final_head;

    void init(Rng& rng, const std::array<int, 4>& channels);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

struct DecoderParams {
    DecoderPhaseParams phase1, phase2;
    std::array<LinearParams, 4> level_heads; // on phase-2 level features

    void init(Rng& rng, const std::array<int, 4>& channels);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

struct DecoderOut {
    Var pred1, pred2;                // (s*s) x 1 sigmoid maps; pred2 is the final saliency
    std::array<Var, 4> level_preds;  // per-level sigmoid maps upsampled to full resolution
};

/// fused maps are ordered levels 2..5. Phase 1 decodes them directly; its
/// sigmoid prediction then gates every level's features for phase 2.
DecoderOut decoder_forward_t(Tape& t, const std::array<Grid, 4>& fused, const DecoderParams& p, int image_size);

} // namespace mf

#pragma once

#include "mf/decoder.hpp"
#include "mf/fusion.hpp"
#include "mf/objectives.hpp"
#include "mf/synth.hpp"

namespace mf {

struct ModelConfig {
    int image_size = 64;
    int width = 64;
    int heads = 4;
    int layers = 2;
    int ffn_hidden = 64;
    double epsilon = 0.6;
    bool use_coarse = true;
    std::array<int, 4> enc_channels = {8, 12, 16, 20};
    std::array<int, 4> token_grids = {8, 4, 2, 1};
    int patch_size = 0;
    FusionStrategy strategy = FusionStrategy::MutualFormer;

    void validate() const;
};

struct LossOptions {
    double lambda = 0.4;
    int ap_window = 31;
    FocalConfig focal;
};

/// The assembled RGB-D saliency network: twin encoder towers, one of six
/// fusion modules, and the two-phase cross-level decoder.
class SodModel {
public:
    SodModel(const ModelConfig& cfg, uint64_t init_seed);

    struct Forward {
        EncoderOut enc;
        std::array<Grid, 4> fused;
        DecoderOut dec;
    };

    Forward forward_t(Tape& t, const SaliencySample& sample) const;
    /// Loss over one sample; breakdown (if non-null) receives the parts.
    Var loss_t(Tape& t, const Forward& f, const SaliencySample& sample, const LossOptions& opts,
               LossBreakdownVars* breakdown = nullptr) const;

    /// Final saliency prediction as an image-shaped matrix.
    Matrix predict(const SaliencySample& sample) const;

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry& registry() { return reg_; }
    const ParamRegistry& registry() const { return reg_; }

    /// Mask downsampled to level resolution by block means thresholded at
    /// 0.5 (ties to foreground), used by the focal terms.
    static Matrix downsample_mask(const Matrix& mask, int target);

private:
    ModelConfig cfg_;
    Encoder encoder_;
    Fusion fusion_;
    DecoderParams decoder_;
    ParamRegistry reg_;
};

} // namespace mf

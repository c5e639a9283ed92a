#pragma once

#include <array>
#include <string>
#include <vector>

#include "mf/encoder.hpp"

namespace mf {

/// The six fusion strategies of the ablation axis. Only the fusion module
/// differs between runs; encoder and decoder shapes stay fixed.
enum class FusionStrategy { Add, Cat, Transformer, CrossFormer, CrossFormerCda, MutualFormer };

FusionStrategy parse_strategy(const std::string& name);
std::string strategy_name(FusionStrategy s);

struct FusionConfig {
    FusionStrategy strategy = FusionStrategy::MutualFormer;
    int width = 64;
    int heads = 4;
    int layers = 2; // MutualFormer stack depth T
    int ffn_hidden = 64;
    double epsilon = 0.6;
    bool use_coarse = true;
    std::array<int, 4> token_grids = {8, 4, 2, 1};
    int patch_size = 0; // 0: derive as grid / token_grid (resizing if needed)
};

struct LevelGeometry {
    int grid = 0;       // level feature resolution
    int channels = 0;   // level feature channels
    int token_grid = 0; // tokens per side
    int patch = 0;      // patch side in embed space
    int embed_grid() const { return token_grid * patch; }
    int tokens() const { return token_grid * token_grid; }
};

/// Token embed/unembed pair shared by the transformer-style strategies.
struct TokenCodec {
    PatchEmbedParams embed_r, embed_d;
    LinearParams unembed; // width -> patch*patch*channels

    void init(Rng& rng, const LevelGeometry& g, int width);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

struct TransformerLevel {
    TokenCodec codec;
    CoarseBranchParams core; // unify + pre-LN attention/FFN sublayers
};

struct CrossLevel {
    TokenCodec codec;
    AttentionParams attn_r, attn_d;
    LayerNormParams ln_r, ln_d;
    FfnParams ffn_r, ffn_d;
    LinearParams merge; // 2 width -> width
};

struct MutualLevel {
    TokenCodec codec;
    StackParams stack;
};

class Fusion {
public:
    void init(Rng& rng, const EncoderConfig& enc, const FusionConfig& cfg);
    void register_into(ParamRegistry& reg, const std::string& prefix);

    std::array<Grid, 4> forward_t(Tape& t, const std::array<Grid, 4>& f_r, const std::array<Grid, 4>& f_d) const;

    const FusionConfig& config() const { return cfg_; }
    const LevelGeometry& geometry(int level_index) const { return geom_[level_index]; }

private:
    Grid fuse_level_t(Tape& t, int li, const Grid& fr, const Grid& fd) const;
    Var tokens_t(Tape& t, int li, const Grid& g, const PatchEmbedParams& pe) const;
    Grid untokens_t(Tape& t, int li, Var tokens, const LinearParams& unembed, const Grid& fr, const Grid& fd) const;

    FusionConfig cfg_;
    std::array<LevelGeometry, 4> geom_;
    std::vector<LinearParams> cat_proj_;
    std::vector<TransformerLevel> transformer_;
    std::vector<CrossLevel> cross_;
    std::vector<MutualLevel> mutual_;
};

} // namespace mf

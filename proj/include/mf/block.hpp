#pragma once

#include <string>
#include <vector>

#include "mf/attention.hpp"

namespace mf {

/// One modality's token bundle; features and positions share shape n x d.
struct TokenSet {
    Matrix features;
    Matrix positions;
    char modality = 'r';
};

struct LinearParams {
    Param w, b;
    void init(Rng& rng, int in, int out);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

struct LayerNormParams {
    Param gain, bias;
    void init(int d);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

/// Two dense layers with a GELU between.
struct FfnParams {
    Param w1, b1, w2, b2;
    void init(Rng& rng, int d, int hidden);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

Var ffn_t(Tape& t, Var x, const FfnParams& p);

/// Single-stream transformer branch over the concatenated modalities,
/// used to speed up fitting: unify (2d -> d), then pre-LN attention and
/// FFN sublayers with residuals.
struct CoarseBranchParams {
    LinearParams unify;
    AttentionParams sa;
    LayerNormParams ln1, ln2;
    FfnParams ffn;
    void init(Rng& rng, int d, int heads, int ffn_hidden);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

struct BlockParams {
    AttentionParams sa_r, sa_d;
    TwoLayerParams combine_r, combine_d; // f_r, f_d: 2d -> d -> d
    CoarseBranchParams coarse;
    LinearParams g; // (3d with coarse branch, else 2d) -> d
    LinearParams h; // residual path, 2d -> d
    LayerNormParams ln;
    FfnParams ffn;
    CdaConfig cda;
    bool use_coarse = true;

    void init(Rng& rng, int d, int heads, int ffn_hidden, bool coarse_branch);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

/// Every sub-result of one block forward, retrievable for inspection.
struct BlockVars {
    AttnVars sa_r, sa_d;
    CdaVars cda;
    Var h_r, h_d;
    Var coarse; // invalid when the coarse branch is disabled
    Var p;
};

/// xr/xd are n x d token features with positions already added.
BlockVars block_forward_t(Tape& t, Var xr, Var xd, const BlockParams& p);

struct StackConfig {
    int layers = 2;
    int heads = 4;
    int width = 64;
    int ffn_hidden = 64;
    double epsilon = 0.6;
    bool use_coarse = true;
};

/// T stacked blocks. The fused output of layer t-1 re-enters layer t through
/// two independent linear re-projection heads that recreate the two modality
/// streams.
struct StackParams {
    std::vector<BlockParams> blocks;
    std::vector<LinearParams> reproj_r, reproj_d; // layers-1 of each

    void init(Rng& rng, const StackConfig& cfg);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

Var stack_forward_t(Tape& t, Var xr, Var xd, const StackParams& p);

// ---- eager wrappers ----

struct BlockTrace {
    Matrix s_r, s_d;         // head-averaged self similarities
    Matrix shat_r, shat_d;   // symmetric-normalized
    Matrix s_rd, s_dr;       // cross-diffusion similarities
    Matrix m_r, m_d;         // self-attention mixes
    Matrix m_rd, m_dr;       // cross mixes
    Matrix h_r, h_d;         // combined modality representations
    Matrix coarse;           // coarse-branch output (empty if disabled)
    Matrix p;                // aggregated output
};

Matrix block_forward(const TokenSet& xr, const TokenSet& xd, const BlockParams& p);
BlockTrace block_forward_trace(const TokenSet& xr, const TokenSet& xd, const BlockParams& p);
Matrix stack_forward(const TokenSet& xr, const TokenSet& xd, const StackParams& p);

// ---- patch embedding ----

/// Patch-to-token projection for one modality: p x p patches of a c-channel
/// grid, flattened pixel-major and projected to width d.
struct PatchEmbedParams {
    Param w, b;
    int patch = 4;
    void init(Rng& rng, int patch_size, int c_in, int d);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

/// Pre-projection patch contents: (h/p * w/p) x (p*p*c), pixel-major.
Matrix patchify(const Matrix& grid, int h, int w, int c, int p);

/// Tokens for one level: project patches, add the fixed sinusoidal encoding.
TokenSet embed(const Matrix& grid, int h, int w, int c, const PatchEmbedParams& pe, char modality);
Var embed_t(Tape& t, Var grid, int h, int w, int c, const PatchEmbedParams& pe);

} // namespace mf

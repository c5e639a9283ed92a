#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mf/matrix.hpp"
#include "mf/rng.hpp"
#include "mf/tape.hpp"

namespace mf {

/// Per-head projections; wq/wk/wv are d x d_h.
struct HeadParams {
    Param wq, wk, wv;
};

/// Multi-head attention parameters for one modality branch. Per-head outputs
/// are concatenated and passed through the w_out/b_out projection.
struct AttentionParams {
    std::vector<HeadParams> heads;
    Param w_out;
    Param b_out;

    int n_heads() const { return static_cast<int>(heads.size()); }
    int model_width() const { return heads.empty() ? 0 : heads[0].wq.value.rows(); }
    int head_dim() const { return heads.empty() ? 0 : heads[0].wq.value.cols(); }

    /// Symmetric-uniform fan-in init; d must be divisible by n_heads.
    void init(Rng& rng, int d, int n_heads);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

/// Two stacked linear maps (the modality combine f_r / f_d and similar).
struct TwoLayerParams {
    Param w1, b1, w2, b2;

    void init(Rng& rng, int in, int hidden, int out);
    void register_into(ParamRegistry& reg, const std::string& prefix);
};

/// Cross-diffusion attention configuration. epsilon blends the diffusion
/// term against the affinity anchor A; the canonical model keeps epsilon
/// strictly inside (0,1), diagnostic mode also admits the endpoints.
struct CdaConfig {
    double epsilon = 0.6;
    bool diagnostic = false;
    std::optional<Matrix> s0_rd; // defaults to identity
    std::optional<Matrix> s0_dr; // defaults to identity
    std::optional<Matrix> a_supplied; // defaults to (S_r + S_d) / 2

    void validate() const;
};

struct AttentionOutput {
    Matrix similarity; // n x n, head-averaged for SA/CA
    Matrix mixed;      // n x d
};

// ---- tape-level building blocks ----

struct AttnVars {
    Var similarity; // head-averaged n x n
    Var mixed;      // n x d after output projection
    Var values;     // n x d concatenated per-head values (CDA consumes these)
};

struct CdaVars {
    Var shat_r, shat_d; // symmetric-normalized inputs
    Var s_rd, s_dr;     // blended cross similarities
    Var m_rd, m_dr;     // similarity-times-values mixes
};

AttnVars self_attention_t(Tape& t, Var x, const AttentionParams& p);
std::pair<AttnVars, AttnVars> cross_attention_t(Tape& t, Var xr, Var xd, const AttentionParams& pr,
                                                const AttentionParams& pd);
CdaVars cross_diffusion_attention_t(Tape& t, Var s_r, Var s_d, Var v_r, Var v_d, const CdaConfig& cfg);
Var combine_modality_t(Tape& t, Var m_self, Var m_cross, const TwoLayerParams& f);

// ---- eager entry points ----

AttentionOutput self_attention(const Matrix& x, const AttentionParams& p);
std::pair<AttentionOutput, AttentionOutput> cross_attention(const Matrix& xr, const Matrix& xd,
                                                            const AttentionParams& pr, const AttentionParams& pd);
std::pair<AttentionOutput, AttentionOutput> cross_diffusion_attention(const Matrix& s_r, const Matrix& s_d,
                                                                      const Matrix& v_r, const Matrix& v_d,
                                                                      const CdaConfig& cfg);
Matrix combine_modality(const Matrix& m_self, const Matrix& m_cross, const TwoLayerParams& f);

/// Fixed 2-D sinusoidal positional encoding for a grid_h x grid_w token
/// grid, one row per token in row-major order. width must be divisible by 4.
Matrix positional_encoding_2d(int grid_h, int grid_w, int width);

} // namespace mf

#pragma once

#include <cstdint>
#include <string>

#include "mf/model.hpp"

namespace mf {

/// One run's full configuration. Every field maps 1:1 to a JSON key and a
/// CLI flag; flags override file values; unknown JSON keys are rejected.
struct RunConfig {
    uint64_t seed = 7;
    std::string strategy = "mutualformer";
    double epsilon = 0.6;
    double lambda = 0.4;
    int layers = 2;
    int heads = 4;
    int width = 64;
    int ffn_hidden = 64;
    bool use_coarse = true;
    bool literal_eq12 = false;
    int ap_window = 31;
    int image_size = 64;
    int train_count = 200;
    int test_count = 50;
    int epochs = 20;
    int batch_size = 4;
    double lr = 2e-3;
    double fuse_lr_scale = 3.0; // fusion-module multiplier (split-rate training)
    int lr_decay_epoch1 = 0; // 0 = auto: 70% of epochs
    int lr_decay_epoch2 = 0; // 0 = auto: 90% of epochs
    bool augment = false;
    std::string data_dir; // load samples from a gen-data directory instead of synthesizing
    // bench / dump-attn geometry
    int n = 64;
    int d = 1024;
    int reps = 100;

    void validate() const;
    ModelConfig model_config() const;
    LossOptions loss_options() const;
    /// Canonical JSON snapshot (sorted keys, one per line).
    std::string to_json() const;
};

RunConfig load_config_file(const std::string& path);
void apply_config_json(RunConfig& cfg, const std::string& json_text);

} // namespace mf

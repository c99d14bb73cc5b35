#pragma once

// Flat dotted-key configuration (`syncronet.cross_attention=true`). Values
// are validated against module contracts at load; violations raise
// ConfigError (exit code 3).

#include <map>
#include <string>

namespace egs {

struct PipelineConfig {
    // stft / audio
    int stft_window = 2048;
    int stft_hop = 512;
    int stft_bins = 1024;
    double rms_threshold = 0.02;
    double clip_seconds = 10.0;
    int griffin_lim_iterations = 60;
    double griffin_lim_momentum = 0.99;

    // video
    int fps_effective = 30;  // {4, 15, 30}

    // diffusion
    int diffusion_steps = 1000;
    int ddim_steps = 20;
    double guidance_scale = 1.0;

    // syncronet
    bool syncronet_enabled = true;
    bool syncronet_cross_attention = true;

    // training defaults (per-module overrides below)
    double train_lr = 1e-4;
    std::string train_optimizer = "adamw";
    int train_epochs = 50;
    int vae_steps = 1500;
    int vae_crop = 256;
    double vae_lr = 1e-3;
    int diffusion_train_steps = 3000;
    double audiosr_lr = 1e-3;
    int audiosr_epochs = 10;
    double vaas_lr = 1e-4;
    int vaas_epochs = 6;
    int vaas_pairs = 1200;
    double mlp_lr = 1e-3;
    int mlp_epochs = 200;
    double summarizer_lr = 5e-3;
    int summarizer_epochs = 8;
    int frame_encoder_steps = 300;

    // seeds (all randomness flows from these)
    uint64_t seed_corpus = 7;
    uint64_t seed_training = 1001;
    uint64_t seed_sampling = 2002;
    uint64_t seed_vaas = 3003;
    uint64_t seed_eval = 4004;

    // Raw key-value view (for hashing and the run manifest).
    std::map<std::string, std::string> raw;

    static PipelineConfig defaults();
    static PipelineConfig from_file(const std::string& path);
    void apply(const std::string& key, const std::string& value);
    void validate() const;
    uint64_t hash() const;
};

}  // namespace egs

#pragma once

// Harness: prepared artifact store, training orchestration for every
// trainable module (order: frame encoder + prepare, VAE, video-to-text MLP,
// unconditional denoiser, control branch), end-to-end inference, evaluation
// reports, and the fps/cross-attention ablation suite.

#include <optional>
#include <string>
#include <vector>

#include "core/audio_sr.hpp"
#include "core/config.hpp"
#include "core/corpus.hpp"
#include "core/metrics.hpp"
#include "core/mlp.hpp"
#include "core/summarize.hpp"
#include "core/syncronet.hpp"
#include "core/unet.hpp"
#include "core/vaas.hpp"
#include "core/vae.hpp"
#include "core/video_embed.hpp"

namespace egs {

struct StoreEntry {
    std::string clip_id;
    std::string spec_native;  // 430x1024 container
    std::string spec512;      // 512x512 container
    std::string emb_rows;     // native embedding rows container
    std::string emb512;       // resized embedding container
    std::string latent;       // cached VAE latent (written by train-vae)
    std::string audio_path;   // source wav (for summarizer GT audio)
    bool excluded = false;
    std::string exclude_reason;
    float scale_min = 0.0f, scale_max = 0.0f;
    std::vector<EventAnnotation> events;
    std::vector<float> gt_text_embedding;
};

struct PreparedStore {
    std::string dir;
    std::vector<StoreEntry> entries;
    float median_scale_min = 0.0f;
    float median_scale_max = 0.0f;

    std::vector<const StoreEntry*> included() const;
    const StoreEntry* find(const std::string& clip_id) const;
    void save_index() const;
    static PreparedStore load(const std::string& dir);
};

// Checkpoint file names per stage.
std::string ckpt_path(const std::string& dir, const std::string& stage);

// --- stages ---

// Trains (or loads) the frame encoder, then converts every corpus clip into
// spectrogram + embedding artifacts. Per-clip data errors skip the clip.
PreparedStore prepare(const std::vector<ClipRecord>& corpus, const std::string& store_dir,
                      const PipelineConfig& cfg, const std::string& ckpt_dir);

void train_vae_stage(PreparedStore& store, const PipelineConfig& cfg,
                     const std::string& ckpt_dir);
void train_mlp_stage(const PreparedStore& store, const PipelineConfig& cfg,
                     const std::string& ckpt_dir);
void train_diffusion_stage(const PreparedStore& store, const PipelineConfig& cfg,
                           const std::string& ckpt_dir);
void train_syncronet_stage(const PreparedStore& store, const PipelineConfig& cfg,
                           const std::string& ckpt_dir, bool cross_attention,
                           int holdout_clips = 0);
void train_audiosr_stage(const PreparedStore& store, const PipelineConfig& cfg,
                         const std::string& ckpt_dir);
// Returns held-out accuracy (%).
double train_vaas_stage(const PreparedStore& store, const PipelineConfig& cfg,
                        const std::string& ckpt_dir);
void train_summarizer_stage(const PreparedStore& store, const PipelineConfig& cfg,
                            const std::string& ckpt_dir, int holdout_clips = 0);

// --- inference ---

struct InferOptions {
    bool use_syncronet = true;
    bool cross_attention = true;         // selects the matching control checkpoint
    int fps_effective = 30;
    bool enhance = true;                 // run the SR stage
    bool dump_intermediates = false;
    std::string syncronet_stage = "";    // override checkpoint stage name
    uint64_t sample_seed = 0;            // folded with the config sampling seed
};

struct InferResult {
    Waveform waveform;
    Spectrogram spec512;       // generated, pre-enhancement
    Spectrogram spec_native;   // 430x1024 after SR + de-resize
    double wall_seconds = 0.0;
};

InferResult infer_clip(const PreparedStore& store, const std::string& clip_id,
                       const PipelineConfig& cfg, const std::string& ckpt_dir,
                       const InferOptions& opt, const std::string& out_wav = "",
                       const std::string& dump_dir = "");

// --- evaluation ---

struct EvaluationRecord {
    std::string variant;
    int n_pairs = 0;
    double vaas = 0.0;        // % above threshold
    double vaas_mean = 0.0;   // mean alignment score
    double fid_value = 0.0;
    double is_value = 0.0;
    double threshold = 0.5;
    uint64_t vaas_checksum = 0;
    uint64_t seed = 0;
};

std::string format_report_line(const EvaluationRecord& r);
void append_report(const std::string& path, const EvaluationRecord& r);

// Scores generated spectrograms (clip_id -> 512x512 grid) against the
// store's video embeddings; FID/IS against the reference spectrograms.
EvaluationRecord evaluate_generated(const std::vector<std::pair<std::string, Tensor>>& generated,
                                    const PreparedStore& store, const VaasModel& vaas_model,
                                    const PipelineConfig& cfg, const std::string& variant);

// `evaluate` CLI entry: reads <clip_id>.spec512.egs files from generated_dir.
EvaluationRecord evaluate_dir(const std::string& generated_dir, const PreparedStore& store,
                              const std::string& vaas_ckpt, const PipelineConfig& cfg,
                              const std::string& report_path);

// Generates spectrograms for the held-out clips under one variant setting.
std::vector<std::pair<std::string, Tensor>> generate_variant(
    const PreparedStore& store, const PipelineConfig& cfg, const std::string& ckpt_dir,
    const InferOptions& opt, const std::vector<std::string>& clip_ids);

// Ablation suite: exactly five rows (no-syncronet, no-cross-attn, 4, 15, 30).
std::vector<EvaluationRecord> run_ablation_suite(const PreparedStore& store,
                                                 const PipelineConfig& cfg,
                                                 const std::string& ckpt_dir,
                                                 const std::string& report_path,
                                                 int eval_clips);

double summarize_stage(const PreparedStore& store, const PipelineConfig& cfg,
                       const std::string& ckpt_dir, AudioSource source,
                       const std::string& report_path, int holdout_clips);

// Run manifest: config hash, seeds, checkpoint checksums, input hashes.
void write_run_manifest(const std::string& path, const std::string& command,
                        const PipelineConfig& cfg,
                        const std::vector<std::pair<std::string, uint64_t>>& checkpoints,
                        const std::vector<std::pair<std::string, uint64_t>>& inputs);

uint64_t file_checksum(const std::string& path);

// Held-out clip ids: the last n included entries.
std::vector<std::string> holdout_clip_ids(const PreparedStore& store, int n);

}  // namespace egs

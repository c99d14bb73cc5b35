#pragma once

// Video-side encoding: a small trainable patch-transformer frame encoder
// producing unit-norm 512-d rows, frame stacking into the image-like video
// embedding, mean pooling, and fps-reduction by holding the last retained
// frame's row.

#include <string>
#include <vector>

#include "core/audio_spectro.hpp"
#include "core/checkpoint.hpp"
#include "core/layers.hpp"

namespace egs {

struct VideoClip {
    std::vector<Tensor> frames;  // each [3,H,W] in [0,1]
    int fps = 30;

    double duration_seconds() const {
        return fps > 0 ? static_cast<double>(frames.size()) / fps : 0.0;
    }
};

// Packed binary clip: header {magic "EGSVID1", frames, H, W, fps as LE u32}
// then 8-bit RGB frame data.
void write_clip(const std::string& path, const VideoClip& clip);
VideoClip read_clip(const std::string& path);

struct VideoEmbedding {
    Tensor native;   // [frames, feature_dim]
    Tensor resized;  // [512, 512]
    int fps = 30;

    GridFile to_grid(bool resized_grid) const;
};

constexpr int kFrameFeatureDim = 512;
constexpr int kEmbeddingImageSize = 512;
constexpr int kNativeFps = 30;

// Patch-transformer frame encoder: 8x8 patches, two attention blocks over a
// 64-d token space, projection to 512, L2 normalization. Resolution-agnostic
// as long as H and W divide by the patch size.
class FrameEncoder {
public:
    explicit FrameEncoder(uint64_t init_seed = 1);

    VarT<float> forward(const VarT<float>& frame) const;  // [3,H,W] -> [512], unit norm
    Tensor encode(const Tensor& frame) const;             // inference path

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void save(const std::string& path, const std::map<std::string, std::string>& meta = {}) const;
    void load(const std::string& path);

    static constexpr int kPatch = 8;
    static constexpr int kTokenDim = 64;

private:
    ParamStore params_;
    LinearLayerT<float> patch_proj_;
    TensorT<float> pos_;  // positional table added to tokens (trainable)
    VarT<float> pos_param_;
    LayerNormLayerT<float> ln1_[2], ln2_[2];
    SelfAttentionT<float> attn_[2];
    LinearLayerT<float> ff1_[2], ff2_[2];
    LinearLayerT<float> out_proj_;
};

// Temporal-contrastive warm-up: adjacent frames of the same clip are
// positives, everything else in the batch is a negative. Returns the
// per-step loss curve.
std::vector<double> train_frame_encoder(FrameEncoder& enc, const std::vector<VideoClip>& clips,
                                        int steps, int batch, float lr, Rng& rng);

VideoEmbedding encode_video(const FrameEncoder& enc, const VideoClip& clip);

// Builds the embedding from precomputed rows (manifest ingestion path).
VideoEmbedding embedding_from_rows(Tensor rows, int fps);

Tensor mean_embedding(const VideoEmbedding& e);

// Hold-last-frame fps reduction on the native rows (resized is recomputed).
VideoEmbedding reduce_fps(const VideoEmbedding& e, int target_fps);

}  // namespace egs

#pragma once

// Video-Audio Alignment Score: a shared-weight patch-transformer extracts
// features from the 512x512 audio spectrogram and the 512x512 video
// embedding; a 5-linear-layer head scores the pair's alignment in [0,1].
// The training set mixes 50% true pairs, 25% cross-video pairs, and 25%
// pairs whose audio is circularly shifted by 1-5 seconds.

#include <map>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/layers.hpp"

namespace egs {

// Pair corpus view: per-clip 512x512 audio spectrograms and video embeddings.
struct VaasCorpusView {
    const std::vector<Tensor>* audio = nullptr;  // each [512,512]
    const std::vector<Tensor>* video = nullptr;  // each [512,512]

    size_t size() const { return audio ? audio->size() : 0; }
};

enum class PairProvenance { TruePair, CrossVideo, TimeShifted };

struct AVPairSample {
    int audio_index = 0;
    int video_index = 0;
    int label = 1;
    PairProvenance provenance = PairProvenance::TruePair;
    double shift_seconds = 0.0;  // in [1,5] for TimeShifted
    int shift_rows = 0;          // circular shift on the audio time axis
};

// Exactly n samples, 50/25/25 composition (+-1 from rounding), deterministic
// under the seed.
std::vector<AVPairSample> build_vaas_dataset(size_t corpus_clips, int n, uint64_t seed);

// Materializes the (possibly shifted) audio grid of a sample.
Tensor vaas_sample_audio(const AVPairSample& s, const VaasCorpusView& corpus);

class VaasModel {
public:
    static constexpr int kFeatureDim = 256;
    static constexpr int kPoolTo = 64;
    static constexpr int kPatch = 8;

    explicit VaasModel(uint64_t init_seed = 4);

    // Shared-weight extractor, one modality at a time: [512,512] -> [256].
    VarT<float> extract(const VarT<float>& grid) const;
    Tensor extract_features(const Tensor& grid) const;  // inference

    VarT<float> score_pair(const VarT<float>& audio, const VarT<float>& video) const;
    double score(const Tensor& audio, const Tensor& video) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    uint64_t extractor_checksum() const;

    void save(const std::string& path, const std::map<std::string, std::string>& meta = {}) const;
    void load(const std::string& path);

private:
    ParamStore params_;
    LinearLayerT<float> patch_proj_;
    VarT<float> pos_param_;
    LayerNormLayerT<float> ln1_[2], ln2_[2];
    SelfAttentionT<float> attn_[2];
    LinearLayerT<float> ff1_[2], ff2_[2];
    LinearLayerT<float> head_[5];
};

struct VaasTrainConfig {
    int epochs = 6;
    float lr = 1e-4f;  // Adam
    uint64_t seed = 0;
    double holdout_fraction = 0.2;
    double threshold = 0.5;
};

struct VaasTrainResult {
    std::vector<double> epoch_losses;
    double holdout_accuracy = 0.0;
    int holdout_count = 0;
};

VaasTrainResult train_vaas(VaasModel& m, const std::vector<AVPairSample>& dataset,
                           const VaasCorpusView& corpus, const VaasTrainConfig& cfg);

// Percentage of pairs scored above the threshold.
double vaas_aggregate(const std::vector<double>& scores, double threshold = 0.5);

}  // namespace egs

#pragma once

// Downstream summarization probe: a CNN predicts a clip's text embedding
// from the video-embedding image, with an optional audio code concatenated at
// the bottleneck. The audio toggle is literal: OFF means a zero vector.

#include <map>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/layers.hpp"
#include "core/wav.hpp"

namespace egs {

enum class AudioSource { None, GroundTruth, Generated };

struct AudioCode {
    Tensor values;  // [512]
    AudioSource source = AudioSource::None;
};

class SummarizerModel {
public:
    static constexpr int kCodeDim = 512;
    static constexpr int kTextDim = 512;

    explicit SummarizerModel(uint64_t init_seed = 5);

    // Toy neural codec: strided 1-d convolutions, global mean pool, projection.
    VarT<float> encode_audio(const VarT<float>& samples) const;  // [1,1,N] -> [512]
    AudioCode encode_audio_code(const Waveform& w) const;

    // Prediction: video embedding image [512,512] + audio code -> [512].
    VarT<float> predict(const VarT<float>& ev_image, const VarT<float>& code) const;
    Tensor predict_summary(const Tensor& ev_resized, const AudioCode& code) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void save(const std::string& path, const std::map<std::string, std::string>& meta = {}) const;
    void load(const std::string& path);

private:
    ParamStore params_;
    Conv2dLayerT<float> ac_[4];     // audio codec (1-d convs as Hx1)
    LinearLayerT<float> ac_proj_;
    Conv2dLayerT<float> vc_[4];     // video CNN
    LinearLayerT<float> head1_, head2_;
};

struct SummarizerTrainItem {
    const Tensor* ev_resized = nullptr;   // [512,512]
    const Waveform* audio = nullptr;      // ground-truth audio
    Tensor gt_text;                       // [512]
};

struct SummarizerTrainConfig {
    int epochs = 8;
    float lr = 5e-3f;
    uint64_t seed = 0;
};

// Joint codec + summarizer training; every item is trained in both toggle
// regimes (zero audio and ground-truth audio).
std::vector<double> train_summarizer(SummarizerModel& m,
                                     const std::vector<SummarizerTrainItem>& items,
                                     const SummarizerTrainConfig& cfg);

double cosine_similarity(const Tensor& a, const Tensor& b);

struct SummaryReportItem {
    const Tensor* ev_resized = nullptr;
    const Waveform* audio = nullptr;  // gt or generated depending on source; null for None
    Tensor gt_text;
};

// Mean cosine similarity between predictions and ground-truth text vectors.
double summarization_report(const SummarizerModel& m, const std::vector<SummaryReportItem>& items,
                            AudioSource source);

}  // namespace egs

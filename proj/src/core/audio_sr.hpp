#pragma once

// Post-processing super-resolution: a six-convolution CNN (output filters
// 16, 32, 64, 64, 32, 1; ReLU + batch norm between, sigmoid head) that maps
// 512x512 spectrograms to 512x1024, recovering the frequency resolution lost
// to the square resize. The frequency axis is nearest-neighbour doubled in
// front of the first convolution.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/audio_spectro.hpp"
#include "core/checkpoint.hpp"
#include "core/layers.hpp"

namespace egs {

class AudioSRModel {
public:
    explicit AudioSRModel(uint64_t init_seed = 3);

    VarT<float> forward(const VarT<float>& x, bool training);  // [1,H,W] -> [1,H,2W]

    // Inference contract: 512x512 in, 512x1024 out, values in [0,1].
    Spectrogram upsample(const Spectrogram& s);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void save(const std::string& path, const std::map<std::string, std::string>& meta = {}) const;
    void load(const std::string& path);

private:
    ParamStore params_;
    Conv2dLayerT<float> conv_[6];
    BatchNorm2dLayerT<float> bn_[5];
};

struct AudioSRTrainConfig {
    int epochs = 10;
    float lr = 1e-3f;
    int crop = 96;  // training crops from the (input, target) pairs
    uint64_t seed = 0;
};

// pairs: (downsampled 512x512, original 512x1024) grids.
std::vector<double> train_audio_sr(AudioSRModel& m,
                                   const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                   const AudioSRTrainConfig& cfg);

double grid_mse(const Tensor& a, const Tensor& b);

}  // namespace egs

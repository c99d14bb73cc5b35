#pragma once

// Spectrogram VAE: 3 stride-2 stages (8x spatial reduction) onto a 4-channel
// latent, sigmoid decoder head so reconstructions live in [0,1]. Trained
// first, then frozen for all diffusion work; encode() returns the mean latent
// scaled so corpus latents have roughly unit variance.

#include <map>
#include <string>
#include <vector>

#include "core/audio_spectro.hpp"
#include "core/checkpoint.hpp"
#include "core/layers.hpp"

namespace egs {

template <class T>
struct PlainResBlockT {
    GroupNormLayerT<T> gn1, gn2;
    Conv2dLayerT<T> conv1, conv2;
    Conv2dLayerT<T> skip;
    bool reshape_skip = false;

    PlainResBlockT() = default;
    PlainResBlockT(ParamStoreT<T>& ps, const std::string& name, int in_ch, int out_ch,
                   Rng& rng) {
        int g1 = in_ch >= 8 ? 8 : in_ch;
        int g2 = out_ch >= 8 ? 8 : out_ch;
        gn1 = GroupNormLayerT<T>(ps, name + ".gn1", in_ch, g1);
        conv1 = Conv2dLayerT<T>(ps, name + ".conv1", in_ch, out_ch, 3, 1, 1, rng);
        gn2 = GroupNormLayerT<T>(ps, name + ".gn2", out_ch, g2);
        conv2 = Conv2dLayerT<T>(ps, name + ".conv2", out_ch, out_ch, 3, 1, 1, rng);
        reshape_skip = in_ch != out_ch;
        if (reshape_skip) skip = Conv2dLayerT<T>(ps, name + ".skip", in_ch, out_ch, 1, 1, 0, rng);
    }

    VarT<T> operator()(const VarT<T>& x) const {
        auto h = conv2(silu(gn2(conv1(silu(gn1(x))))));
        return add(h, reshape_skip ? skip(x) : x);
    }
};

class Vae {
public:
    static constexpr int kLatentChannels = 4;

    explicit Vae(uint64_t init_seed = 2);

    // Graph paths (training).
    VarT<float> encode_moments(const VarT<float>& x) const;  // [8,h,w]: mean then logvar
    VarT<float> decode_raw(const VarT<float>& z) const;      // sigmoid output [1,H,W]

    // Inference contract: mean latent, scaled.
    Tensor encode(const Tensor& image) const;  // [1,H,W] in [0,1] -> [4,h,w]
    Tensor decode(const Tensor& z) const;      // [4,h,w] -> [1,H,W] in [0,1]

    float latent_scale() const { return latent_scale_; }
    void set_latent_scale(float s) { latent_scale_ = s; }

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void save(const std::string& path, const std::map<std::string, std::string>& meta = {}) const;
    void load(const std::string& path);

private:
    ParamStore params_;
    Conv2dLayerT<float> e_in_;
    PlainResBlockT<float> e_rb1_, e_rb2_, e_rb3_;
    Conv2dLayerT<float> e_down1_, e_down2_;
    GroupNormLayerT<float> e_gn_;
    Conv2dLayerT<float> e_out_;
    Conv2dLayerT<float> d_in_;
    PlainResBlockT<float> d_rb1_, d_rb2_, d_rb3_;
    Conv2dLayerT<float> d_up1_, d_up2_, d_up3_;
    GroupNormLayerT<float> d_gn_;
    Conv2dLayerT<float> d_out_;
    float latent_scale_ = 1.0f;
};

struct VaeTrainConfig {
    int steps = 1500;
    int crop = 256;          // random training crops (multiple of 8)
    int full_steps = 64;     // tail steps at the native 512 resolution
    float lr = 1e-3f;
    float kl_weight = 1e-6f;
    uint64_t seed = 0;
};

// Trains on [0,1] spectrogram images ([512,512] grids). Returns per-step loss.
// Afterwards the latent scale is calibrated on a corpus sample.
std::vector<double> train_vae(Vae& vae, const std::vector<Tensor>& images,
                              const VaeTrainConfig& cfg);

double psnr_db(const Tensor& a, const Tensor& b);

}  // namespace egs

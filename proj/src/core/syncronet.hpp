#pragma once

// Control branch for synchronized audio generation: a trainable copy of the
// denoiser's encoder + middle block consumes the noisy latent fused with an
// encoded video embedding, self/cross-attends against the video rows, and
// taps 13 zero-convolution control signals that are added to the frozen
// decoder's 12 skip connections and middle input.

#include "core/unet.hpp"
#include "core/video_embed.hpp"

namespace egs {

// Conv stack mapping the 512x512 embedding image into the encoder's feature
// space (base_channels x 64 x 64).
template <class T>
struct HintEncoderT {
    Conv2dLayerT<T> c1, c2, c3, c4;

    HintEncoderT() = default;
    HintEncoderT(ParamStoreT<T>& ps, const std::string& p, int out_ch, Rng& rng) {
        c1 = Conv2dLayerT<T>(ps, p + ".c1", 1, 8, 3, 2, 1, rng);
        c2 = Conv2dLayerT<T>(ps, p + ".c2", 8, 16, 3, 2, 1, rng);
        c3 = Conv2dLayerT<T>(ps, p + ".c3", 16, 32, 3, 2, 1, rng);
        c4 = Conv2dLayerT<T>(ps, p + ".c4", 32, out_ch, 3, 1, 1, rng);
    }

    VarT<T> operator()(const VarT<T>& ev_image) const {
        return c4(silu(c3(silu(c2(silu(c1(ev_image)))))));
    }
};

template <class T>
class SyncroNetT {
public:
    SyncroNetT(const UNetConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
        Rng rng(init_seed, 0x5c);
        temb1_ = LinearLayerT<T>(params_, "temb.l1", cfg.temb_dim, cfg.temb_dim, rng);
        temb2_ = LinearLayerT<T>(params_, "temb.l2", cfg.temb_dim, cfg.temb_dim, rng);
        encoder_ = UNetEncoderT<T>(params_, "enc", cfg, rng);
        hint_ = HintEncoderT<T>(params_, "hint", cfg.width(0), rng);
        int w0 = cfg.width(0), w1 = cfg.width(1), w2 = cfg.width(2), w3 = cfg.width(3);
        int taps[kInjectionPoints] = {w0, w0, w0, w0, w1, w1, w1, w2, w2, w2, w3, w3, w3};
        for (int i = 0; i < kInjectionPoints; ++i)
            zero_conv_[i] = Conv2dLayerT<T>(params_, "zc" + std::to_string(i + 1), taps[i],
                                            taps[i], 1, 1, 0, rng, /*zero_init=*/true);
        cross_attention_enabled_ = true;
    }

    // Copies the frozen denoiser's encoder + time-embedding parameters
    // bit-for-bit (zero convs and hint encoder keep their own init).
    void init_from_denoiser(const UNetT<T>& frozen) {
        for (auto& [name, p] : params_.items) {
            auto src = frozen.params().find(name);
            if (src) {
                check_contract(src->value.same_shape(p->value),
                               "syncronet: copy shape mismatch for " + name);
                p->value = src->value;
            }
        }
    }

    VarT<T> hint_forward(const VarT<T>& ev_resized) const {
        const auto& s = ev_resized->value;
        check_contract(s.ndim() == 3 && s.dim(0) == 1, "hint: need [1,H,W] embedding image");
        auto h = hint_(ev_resized);
        check_contract(h->value.dim(1) == cfg_.latent_size && h->value.dim(2) == cfg_.latent_size,
                       "hint: output spatial shape must match the latent");
        return h;
    }

    // Algorithm: timestep embedding, hint added after the first encoder
    // block, self+cross attention at the transformer sites with the raw
    // video rows as context, one zero-conv tap per block plus the middle.
    std::vector<VarT<T>> generate_controls(const VarT<T>& x, const VideoEmbedding& ev, int t) const
        requires std::is_same_v<T, float>
    {
        check_contract(ev.resized.numel() > 0, "syncronet: e_v.resized missing");
        auto temb = temb2_.vec(silu(temb1_.vec(leaf(timestep_embedding<T>(t, cfg_.temb_dim)))));
        auto context = leaf(ev.native);
        Tensor img = ev.resized;
        img.shape = {1, ev.resized.dim(0), ev.resized.dim(1)};
        auto hint = hint_forward(leaf(img));
        auto taps = encoder_.forward(x, temb, context, cross_attention_enabled_, hint);
        std::vector<VarT<T>> controls;
        controls.reserve(kInjectionPoints);
        for (int i = 0; i < kInjectionPoints; ++i) controls.push_back(zero_conv_[i](taps[i]));
        return controls;
    }

    // Inference path: plain tensors, no graph.
    ControlSignalSetT<T> controls_for(const Tensor& z_t, const VideoEmbedding& ev, int t,
                                      T guidance_scale = T(1)) const
        requires std::is_same_v<T, float>
    {
        NoGradGuard ng;
        auto vars = generate_controls(leaf(z_t), ev, t);
        ControlSignalSetT<T> out;
        out.guidance_scale = guidance_scale;
        for (auto& v : vars) out.signals.push_back(v->value);
        return out;
    }

    void set_cross_attention(bool on) { cross_attention_enabled_ = on; }
    bool cross_attention() const { return cross_attention_enabled_; }

    const UNetConfig& config() const { return cfg_; }
    ParamStoreT<T>& params() { return params_; }
    const ParamStoreT<T>& params() const { return params_; }
    const UNetEncoderT<T>& encoder() const { return encoder_; }
    const HintEncoderT<T>& hint_encoder() const { return hint_; }
    const Conv2dLayerT<T>& zero_conv(int i) const { return zero_conv_[i]; }
    const LinearLayerT<T>& temb1() const { return temb1_; }
    const LinearLayerT<T>& temb2() const { return temb2_; }

private:
    UNetConfig cfg_;
    ParamStoreT<T> params_;
    LinearLayerT<T> temb1_, temb2_;
    UNetEncoderT<T> encoder_;
    HintEncoderT<T> hint_;
    Conv2dLayerT<T> zero_conv_[kInjectionPoints];
    bool cross_attention_enabled_ = true;
};

using SyncroNet = SyncroNetT<float>;

// h = x + HintEncoder(e_v.resized), the element-wise hint fusion.
Tensor fuse_hint(const Tensor& x, const VideoEmbedding& ev, const SyncroNet& m);

struct SyncroTrainItem {
    Tensor z0;         // clean latent [4,64,64]
    Tensor ev_rows;    // native video embedding rows
    Tensor ev_resized; // 512x512 embedding image
    Tensor c_t;        // conditioning vector for the frozen denoiser
};

struct SyncroTrainConfig {
    int epochs = 50;
    float lr = 1e-4f;
    float weight_decay = 1e-2f;
    uint64_t seed = 0;
    bool cross_attention = true;
    std::string checkpoint_dir;  // per-epoch checkpoints when non-empty
    int fps_effective = 30;
};

// Trains only the control branch against a frozen denoiser; verifies by
// checksum that frozen parameters never move. Returns per-epoch mean loss.
std::vector<double> train_syncronet(SyncroNet& m, const UNet& frozen, const NoiseSchedule& ns,
                                    const std::vector<SyncroTrainItem>& data,
                                    const SyncroTrainConfig& cfg);

void save_syncronet(const std::string& path, const SyncroNet& m, const UNet& frozen,
                    const std::map<std::string, std::string>& extra_meta = {});
// Verifies the recorded frozen-model checksum against `frozen`.
void load_syncronet(const std::string& path, SyncroNet& m, const UNet& frozen);

}  // namespace egs

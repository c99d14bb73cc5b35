#pragma once

// Time-conditional UNet denoiser. The topology is fixed: 12 encoder blocks
// (conv-in, residual blocks, downsamples), 1 middle block, 12 decoder blocks,
// with self+cross attention at 7 sites (two per level on the three lower
// resolutions, one in the middle). The decoder consumes 12 skip connections
// plus the middle output -- 13 injection points for external control signals.

#include <array>
#include <optional>

#include "core/checkpoint.hpp"
#include "core/diffusion.hpp"
#include "core/layers.hpp"

namespace egs {

struct UNetConfig {
    int latent_channels = 4;
    int latent_size = 64;
    int base_channels = 32;
    std::array<int, 4> mults = {1, 2, 4, 8};
    int ctx_dim = 512;
    int temb_dim = 128;

    int width(int level) const { return base_channels * mults[static_cast<size_t>(level)]; }
    int groups() const { return base_channels >= 8 ? 8 : base_channels; }
};

constexpr int kEncoderBlocks = 12;
constexpr int kInjectionPoints = 13;  // 12 skips + middle
constexpr int kAttentionSites = 7;

template <class T>
struct ResBlockT {
    GroupNormLayerT<T> gn1, gn2;
    Conv2dLayerT<T> conv1, conv2;
    LinearLayerT<T> emb;
    Conv2dLayerT<T> skip;
    bool reshape_skip = false;

    ResBlockT() = default;
    ResBlockT(ParamStoreT<T>& ps, const std::string& name, int in_ch, int out_ch, int temb_dim,
              int groups, Rng& rng) {
        gn1 = GroupNormLayerT<T>(ps, name + ".gn1", in_ch, std::min(groups, in_ch));
        conv1 = Conv2dLayerT<T>(ps, name + ".conv1", in_ch, out_ch, 3, 1, 1, rng);
        emb = LinearLayerT<T>(ps, name + ".emb", temb_dim, out_ch, rng);
        gn2 = GroupNormLayerT<T>(ps, name + ".gn2", out_ch, std::min(groups, out_ch));
        conv2 = Conv2dLayerT<T>(ps, name + ".conv2", out_ch, out_ch, 3, 1, 1, rng);
        reshape_skip = in_ch != out_ch;
        if (reshape_skip) skip = Conv2dLayerT<T>(ps, name + ".skip", in_ch, out_ch, 1, 1, 0, rng);
    }

    VarT<T> operator()(const VarT<T>& x, const VarT<T>& temb) const {
        auto h = conv1(silu(gn1(x)));
        h = add_channel_vec(h, emb.vec(silu(temb)));
        h = conv2(silu(gn2(h)));
        return add(h, reshape_skip ? skip(x) : x);
    }
};

// One "spatial transformer" site: normalized spatial tokens pass through
// residual self-attention, residual cross-attention against the context rows,
// and a zero-initialized output projection back onto the feature map.
template <class T>
struct AttnSiteT {
    GroupNormLayerT<T> gn;
    SelfAttentionT<T> self_attn;
    CrossAttentionT<T> cross_attn;
    LinearLayerT<T> proj_out;

    AttnSiteT() = default;
    AttnSiteT(ParamStoreT<T>& ps, const std::string& name, int ch, int ctx_dim, int groups,
              Rng& rng) {
        gn = GroupNormLayerT<T>(ps, name + ".gn", ch, std::min(groups, ch));
        self_attn = SelfAttentionT<T>(ps, name + ".self", ch, rng);
        cross_attn = CrossAttentionT<T>(ps, name + ".cross", ch, ctx_dim, rng, /*zero_out=*/true);
        proj_out = LinearLayerT<T>(ps, name + ".proj", ch, ch, rng, /*zero_init=*/true);
    }

    VarT<T> operator()(const VarT<T>& x, const VarT<T>& context, bool use_cross) const {
        const int h = x->value.dim(1), w = x->value.dim(2);
        auto tok = chw_to_tokens(gn(x));
        tok = self_attn(tok);
        if (context && use_cross) tok = cross_attn(tok, context);
        tok = proj_out(tok);
        return add(x, tokens_to_chw(tok, h, w));
    }
};

// Shared encoder trunk (12 blocks + middle). Used verbatim by the denoiser
// and duplicated as the trainable control branch, so both sides register
// identically named parameters.
template <class T>
struct UNetEncoderT {
    UNetConfig cfg;
    Conv2dLayerT<T> conv_in;
    ResBlockT<T> rb[8];      // level blocks in order
    AttnSiteT<T> attn[6];    // sites on the three lower levels
    Conv2dLayerT<T> down[3];
    ResBlockT<T> mid1, mid2;
    AttnSiteT<T> mid_attn;

    struct BlockOut {
        VarT<T> h;
    };

    UNetEncoderT() = default;
    UNetEncoderT(ParamStoreT<T>& ps, const std::string& p, const UNetConfig& cfg_, Rng& rng)
        : cfg(cfg_) {
        const int g = cfg.groups();
        conv_in = Conv2dLayerT<T>(ps, p + ".in", cfg.latent_channels, cfg.width(0), 3, 1, 1, rng);
        int w0 = cfg.width(0), w1 = cfg.width(1), w2 = cfg.width(2), w3 = cfg.width(3);
        rb[0] = ResBlockT<T>(ps, p + ".b2", w0, w0, cfg.temb_dim, g, rng);
        rb[1] = ResBlockT<T>(ps, p + ".b3", w0, w0, cfg.temb_dim, g, rng);
        down[0] = Conv2dLayerT<T>(ps, p + ".d4", w0, w0, 3, 2, 1, rng);
        rb[2] = ResBlockT<T>(ps, p + ".b5", w0, w1, cfg.temb_dim, g, rng);
        attn[0] = AttnSiteT<T>(ps, p + ".a5", w1, cfg.ctx_dim, g, rng);
        rb[3] = ResBlockT<T>(ps, p + ".b6", w1, w1, cfg.temb_dim, g, rng);
        attn[1] = AttnSiteT<T>(ps, p + ".a6", w1, cfg.ctx_dim, g, rng);
        down[1] = Conv2dLayerT<T>(ps, p + ".d7", w1, w1, 3, 2, 1, rng);
        rb[4] = ResBlockT<T>(ps, p + ".b8", w1, w2, cfg.temb_dim, g, rng);
        attn[2] = AttnSiteT<T>(ps, p + ".a8", w2, cfg.ctx_dim, g, rng);
        rb[5] = ResBlockT<T>(ps, p + ".b9", w2, w2, cfg.temb_dim, g, rng);
        attn[3] = AttnSiteT<T>(ps, p + ".a9", w2, cfg.ctx_dim, g, rng);
        down[2] = Conv2dLayerT<T>(ps, p + ".d10", w2, w2, 3, 2, 1, rng);
        rb[6] = ResBlockT<T>(ps, p + ".b11", w2, w3, cfg.temb_dim, g, rng);
        attn[4] = AttnSiteT<T>(ps, p + ".a11", w3, cfg.ctx_dim, g, rng);
        rb[7] = ResBlockT<T>(ps, p + ".b12", w3, w3, cfg.temb_dim, g, rng);
        attn[5] = AttnSiteT<T>(ps, p + ".a12", w3, cfg.ctx_dim, g, rng);
        mid1 = ResBlockT<T>(ps, p + ".m1", w3, w3, cfg.temb_dim, g, rng);
        mid_attn = AttnSiteT<T>(ps, p + ".ma", w3, cfg.ctx_dim, g, rng);
        mid2 = ResBlockT<T>(ps, p + ".m2", w3, w3, cfg.temb_dim, g, rng);
    }

    // Runs the 12 blocks + middle. `hint` (optional) is added after the first
    // block. Emits the 12 block outputs in order plus the middle output.
    std::vector<VarT<T>> forward(const VarT<T>& x, const VarT<T>& temb, const VarT<T>& context,
                                 bool use_cross, const VarT<T>& hint) const {
        std::vector<VarT<T>> outs;
        outs.reserve(kInjectionPoints);
        auto h = conv_in(x);
        if (hint) h = add(h, hint);
        outs.push_back(h);
        h = rb[0](h, temb);
        outs.push_back(h);
        h = rb[1](h, temb);
        outs.push_back(h);
        h = down[0](h);
        outs.push_back(h);
        h = attn[0](rb[2](h, temb), context, use_cross);
        outs.push_back(h);
        h = attn[1](rb[3](h, temb), context, use_cross);
        outs.push_back(h);
        h = down[1](h);
        outs.push_back(h);
        h = attn[2](rb[4](h, temb), context, use_cross);
        outs.push_back(h);
        h = attn[3](rb[5](h, temb), context, use_cross);
        outs.push_back(h);
        h = down[2](h);
        outs.push_back(h);
        h = attn[4](rb[6](h, temb), context, use_cross);
        outs.push_back(h);
        h = attn[5](rb[7](h, temb), context, use_cross);
        outs.push_back(h);
        h = mid2(mid_attn(mid1(h, temb), context, use_cross), temb);
        outs.push_back(h);  // middle output, 13th tap
        return outs;
    }
};

// Optional per-injection-point additive control.
template <class T>
struct ControlSignalSetT {
    std::vector<TensorT<T>> signals;  // exactly 13, encoder order then middle
    T guidance_scale = T(1);
};

using ControlSignalSet = ControlSignalSetT<float>;

template <class T>
class UNetT {
public:
    UNetT(const UNetConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
        Rng rng(init_seed, 0xd1f);
        temb1_ = LinearLayerT<T>(params_, "temb.l1", cfg.temb_dim, cfg.temb_dim, rng);
        temb2_ = LinearLayerT<T>(params_, "temb.l2", cfg.temb_dim, cfg.temb_dim, rng);
        encoder_ = UNetEncoderT<T>(params_, "enc", cfg, rng);
        const int g = cfg.groups();
        int w0 = cfg.width(0), w1 = cfg.width(1), w2 = cfg.width(2), w3 = cfg.width(3);
        int in_ch[12] = {w3 + w3, w3 + w3, w3 + w2, w3 + w2, w2 + w2, w2 + w1,
                         w2 + w1, w1 + w1, w1 + w0, w1 + w0, w0 + w0, w0 + w0};
        int out_ch[12] = {w3, w3, w3, w2, w2, w2, w1, w1, w1, w0, w0, w0};
        for (int i = 0; i < 12; ++i)
            dec_[i] = ResBlockT<T>(params_, "dec.b" + std::to_string(i + 1), in_ch[i], out_ch[i],
                                   cfg.temb_dim, g, rng);
        up_[0] = Conv2dLayerT<T>(params_, "dec.up1", w3, w3, 3, 1, 1, rng);
        up_[1] = Conv2dLayerT<T>(params_, "dec.up2", w2, w2, 3, 1, 1, rng);
        up_[2] = Conv2dLayerT<T>(params_, "dec.up3", w1, w1, 3, 1, 1, rng);
        out_gn_ = GroupNormLayerT<T>(params_, "out.gn", w0, g);
        // Zero-initialized head: an untrained denoiser predicts zero noise.
        out_conv_ = Conv2dLayerT<T>(params_, "out.conv", w0, cfg.latent_channels, 3, 1, 1, rng,
                                    /*zero_init=*/true);
    }

    // context: [N,ctx_dim] token rows (a single conditioning vector is one row);
    // may be null for unconditional use.
    VarT<T> forward(const VarT<T>& z_t, int t, const VarT<T>& context,
                    const ControlSignalSetT<T>* controls = nullptr) const {
        check_contract(z_t->value.ndim() == 3 && z_t->value.dim(0) == cfg_.latent_channels &&
                           z_t->value.dim(1) == cfg_.latent_size &&
                           z_t->value.dim(2) == cfg_.latent_size,
                       "unet: latent shape mismatch");
        auto temb = temb2_.vec(silu(temb1_.vec(leaf(timestep_embedding<T>(t, cfg_.temb_dim)))));
        auto taps = encoder_.forward(z_t, temb, context, /*use_cross=*/true, nullptr);
        std::vector<VarT<T>> skips(taps.begin(), taps.begin() + kEncoderBlocks);
        auto h = taps.back();
        if (controls) {
            check_contract(static_cast<int>(controls->signals.size()) == kInjectionPoints,
                           "unet: control signal count must be 13");
            for (int i = 0; i < kEncoderBlocks; ++i) {
                check_contract(controls->signals[i].same_shape(skips[i]->value),
                               "unet: control signal " + std::to_string(i + 1) +
                                   " shape mismatch");
                skips[i] = add(skips[i], leaf(scaled(controls->signals[i],
                                                     controls->guidance_scale)));
            }
            check_contract(controls->signals[12].same_shape(h->value),
                           "unet: middle control shape mismatch");
            h = add(h, leaf(scaled(controls->signals[12], controls->guidance_scale)));
        }
        for (int i = 0; i < 12; ++i) {
            h = dec_[i](concat_channels(h, skips[11 - i]), temb);
            if (i == 2) h = up_[0](upsample_nearest(h, 2, 2));
            if (i == 5) h = up_[1](upsample_nearest(h, 2, 2));
            if (i == 8) h = up_[2](upsample_nearest(h, 2, 2));
        }
        return out_conv_(silu(out_gn_(h)));
    }

    // Graph-carrying variant used by the control branch during its training:
    // controls arrive as graph nodes so gradients flow back through the
    // injections into the branch.
    VarT<T> forward_with_control_vars(const VarT<T>& z_t, int t, const VarT<T>& context,
                                      const std::vector<VarT<T>>& controls) const {
        check_contract(static_cast<int>(controls.size()) == kInjectionPoints,
                       "unet: control signal count must be 13");
        auto temb = temb2_.vec(silu(temb1_.vec(leaf(timestep_embedding<T>(t, cfg_.temb_dim)))));
        auto taps = encoder_.forward(z_t, temb, context, true, nullptr);
        std::vector<VarT<T>> skips(taps.begin(), taps.begin() + kEncoderBlocks);
        auto h = taps.back();
        for (int i = 0; i < kEncoderBlocks; ++i) skips[i] = add(skips[i], controls[i]);
        h = add(h, controls[12]);
        for (int i = 0; i < 12; ++i) {
            h = dec_[i](concat_channels(h, skips[11 - i]), temb);
            if (i == 2) h = up_[0](upsample_nearest(h, 2, 2));
            if (i == 5) h = up_[1](upsample_nearest(h, 2, 2));
            if (i == 8) h = up_[2](upsample_nearest(h, 2, 2));
        }
        return out_conv_(silu(out_gn_(h)));
    }

    Tensor predict_eps(const Tensor& z_t, int t, const Tensor* context_rows,
                       const ControlSignalSetT<T>* controls = nullptr) const
        requires std::is_same_v<T, float>
    {
        NoGradGuard ng;
        VarT<T> ctx = context_rows ? leaf(ensure_rows(*context_rows)) : nullptr;
        return forward(leaf(z_t), t, ctx, controls)->value;
    }

    const UNetConfig& config() const { return cfg_; }
    ParamStoreT<T>& params() { return params_; }
    const ParamStoreT<T>& params() const { return params_; }
    const UNetEncoderT<T>& encoder() const { return encoder_; }
    const LinearLayerT<T>& temb1() const { return temb1_; }
    const LinearLayerT<T>& temb2() const { return temb2_; }

    static TensorT<T> ensure_rows(const TensorT<T>& ctx) {
        if (ctx.ndim() == 2) return ctx;
        TensorT<T> rows = ctx;
        rows.shape = {1, static_cast<int>(ctx.numel())};
        return rows;
    }

private:
    static TensorT<T> scaled(const TensorT<T>& x, T s) {
        if (s == T(1)) return x;
        TensorT<T> out = x;
        for (auto& v : out.v) v *= s;
        return out;
    }

    UNetConfig cfg_;
    ParamStoreT<T> params_;
    LinearLayerT<T> temb1_, temb2_;
    UNetEncoderT<T> encoder_;
    ResBlockT<T> dec_[12];
    Conv2dLayerT<T> up_[3];
    GroupNormLayerT<T> out_gn_;
    Conv2dLayerT<T> out_conv_;
};

using UNet = UNetT<float>;

}  // namespace egs

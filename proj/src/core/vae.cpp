#include "core/vae.hpp"

namespace egs {

Vae::Vae(uint64_t init_seed) {
    Rng rng(init_seed, 0xae);
    e_in_ = Conv2dLayerT<float>(params_, "e.in", 1, 8, 3, 2, 1, rng);
    e_rb1_ = PlainResBlockT<float>(params_, "e.rb1", 8, 16, rng);
    e_down1_ = Conv2dLayerT<float>(params_, "e.d1", 16, 16, 3, 2, 1, rng);
    e_rb2_ = PlainResBlockT<float>(params_, "e.rb2", 16, 32, rng);
    e_down2_ = Conv2dLayerT<float>(params_, "e.d2", 32, 32, 3, 2, 1, rng);
    e_rb3_ = PlainResBlockT<float>(params_, "e.rb3", 32, 48, rng);
    e_gn_ = GroupNormLayerT<float>(params_, "e.gn", 48, 8);
    e_out_ = Conv2dLayerT<float>(params_, "e.out", 48, 2 * kLatentChannels, 1, 1, 0, rng);

    d_in_ = Conv2dLayerT<float>(params_, "d.in", kLatentChannels, 48, 1, 1, 0, rng);
    d_rb1_ = PlainResBlockT<float>(params_, "d.rb1", 48, 48, rng);
    d_up1_ = Conv2dLayerT<float>(params_, "d.up1", 48, 24, 3, 1, 1, rng);
    d_rb2_ = PlainResBlockT<float>(params_, "d.rb2", 24, 24, rng);
    d_up2_ = Conv2dLayerT<float>(params_, "d.up2", 24, 12, 3, 1, 1, rng);
    d_rb3_ = PlainResBlockT<float>(params_, "d.rb3", 12, 12, rng);
    d_up3_ = Conv2dLayerT<float>(params_, "d.up3", 12, 8, 3, 1, 1, rng);
    d_gn_ = GroupNormLayerT<float>(params_, "d.gn", 8, 8);
    d_out_ = Conv2dLayerT<float>(params_, "d.out", 8, 1, 3, 1, 1, rng);
}

VarT<float> Vae::encode_moments(const VarT<float>& x) const {
    check_contract(x->value.ndim() == 3 && x->value.dim(0) == 1, "vae: need [1,H,W] input");
    check_contract(x->value.dim(1) % 8 == 0 && x->value.dim(2) % 8 == 0,
                   "vae: dims must divide by 8");
    auto h = e_in_(x);
    h = e_rb1_(h);
    h = e_down1_(h);
    h = e_rb2_(h);
    h = e_down2_(h);
    h = e_rb3_(h);
    return e_out_(silu(e_gn_(h)));
}

VarT<float> Vae::decode_raw(const VarT<float>& z) const {
    check_contract(z->value.ndim() == 3 && z->value.dim(0) == kLatentChannels,
                   "vae: latent must have 4 channels");
    auto h = d_in_(z);
    h = d_rb1_(h);
    h = d_up1_(upsample_nearest(h, 2, 2));
    h = d_rb2_(h);
    h = d_up2_(upsample_nearest(h, 2, 2));
    h = d_rb3_(h);
    h = d_up3_(upsample_nearest(h, 2, 2));
    return sigmoid(d_out_(silu(d_gn_(h))));
}

Tensor Vae::encode(const Tensor& image) const {
    NoGradGuard ng;
    Tensor in = image;
    if (in.ndim() == 2) in.shape = {1, image.dim(0), image.dim(1)};
    auto m = encode_moments(leaf(in))->value;
    const int h = m.dim(1), w = m.dim(2);
    Tensor z({kLatentChannels, h, w});
    std::copy(m.v.begin(), m.v.begin() + z.numel(), z.v.begin());
    for (auto& v : z.v) v *= latent_scale_;
    return z;
}

Tensor Vae::decode(const Tensor& z) const {
    NoGradGuard ng;
    Tensor zs = z;
    check_contract(latent_scale_ > 0.0f, "vae: bad latent scale");
    for (auto& v : zs.v) v /= latent_scale_;
    Tensor out = decode_raw(leaf(zs))->value;
    Tensor img({out.dim(1), out.dim(2)});
    std::copy(out.v.begin(), out.v.end(), img.v.begin());
    return img;
}

void Vae::save(const std::string& path, const std::map<std::string, std::string>& meta) const {
    auto m = meta;
    m["latent_scale"] = std::to_string(latent_scale_);
    save_checkpoint(path, "vae", params_, m);
}

void Vae::load(const std::string& path) {
    auto meta = load_checkpoint(path, "vae", params_);
    auto it = meta.find("latent_scale");
    if (it != meta.end()) latent_scale_ = std::stof(it->second);
}

std::vector<double> train_vae(Vae& vae, const std::vector<Tensor>& images,
                              const VaeTrainConfig& cfg) {
    check_contract(!images.empty(), "train_vae: empty dataset");
    Rng rng(cfg.seed, 0xa3);
    AdamW opt(vae.params(), cfg.lr);
    std::vector<double> losses;

    auto step_on = [&](const Tensor& crop) {
        opt.zero_grad();
        auto x = leaf(crop);
        auto mom = vae.encode_moments(x);
        const auto& mv = mom->value;
        const int lh = mv.dim(1), lw = mv.dim(2);
        // split mean / logvar and reparameterize
        Tensor noise({Vae::kLatentChannels, lh, lw});
        for (auto& v : noise.v) v = static_cast<float>(rng.gaussian());

        // mean = mom[:4], logvar = mom[4:], z = mean + exp(0.5*logvar)*eps
        auto split = [&](int from) {
            Tensor out_t({Vae::kLatentChannels, lh, lw});
            std::copy(mv.v.begin() + static_cast<int64_t>(from) * lh * lw,
                      mv.v.begin() + static_cast<int64_t>(from + Vae::kLatentChannels) * lh * lw,
                      out_t.v.begin());
            int64_t off = static_cast<int64_t>(from) * lh * lw;
            return make_node<float>(std::move(out_t), {mom}, [off](NodeT<float>& nd) {
                auto& g = nd.parents[0]->ensure_grad();
                for (int64_t i = 0; i < nd.grad.numel(); ++i) g.v[off + i] += nd.grad.v[i];
            });
        };
        auto mean = split(0);
        auto logvar = split(Vae::kLatentChannels);
        auto std_dev = unary_op(
            logvar, [](float x) { return std::exp(0.5f * x); },
            [](float x, float y) { return 0.5f * y; });
        auto z = add(mean, mul(std_dev, leaf(noise)));
        auto recon = vae.decode_raw(z);
        auto rec_loss = mse_loss(recon, x);
        // KL(N(mean, var) || N(0,1)) averaged over elements
        auto kl_terms = add(mul(mean, mean), unary_op(
                                                 logvar,
                                                 [](float x) { return std::exp(x) - x - 1.0f; },
                                                 [](float x, float) {
                                                     return std::exp(x) - 1.0f;
                                                 }));
        auto loss = add(rec_loss, scale(mean_all(kl_terms), 0.5f * cfg.kl_weight));
        backward(loss);
        opt.step();
        return static_cast<double>(loss->value.v[0]);
    };

    for (int s = 0; s < cfg.steps; ++s) {
        const Tensor& img = images[rng.below(static_cast<uint32_t>(images.size()))];
        int cs = std::min(cfg.crop, std::min(img.dim(0), img.dim(1)));
        cs -= cs % 8;
        int oy = img.dim(0) > cs ? static_cast<int>(rng.below(img.dim(0) - cs)) : 0;
        int ox = img.dim(1) > cs ? static_cast<int>(rng.below(img.dim(1) - cs)) : 0;
        Tensor crop({1, cs, cs});
        for (int y = 0; y < cs; ++y)
            for (int x = 0; x < cs; ++x) crop.at3(0, y, x) = img.at2(oy + y, ox + x);
        losses.push_back(step_on(crop));
    }
    for (int s = 0; s < cfg.full_steps; ++s) {
        const Tensor& img = images[rng.below(static_cast<uint32_t>(images.size()))];
        Tensor full({1, img.dim(0), img.dim(1)});
        std::copy(img.v.begin(), img.v.end(), full.v.begin());
        losses.push_back(step_on(full));
    }

    // Calibrate the latent scale so diffusion sees roughly unit-variance data.
    double acc = 0.0;
    int64_t count = 0;
    vae.set_latent_scale(1.0f);
    for (size_t i = 0; i < images.size(); i += std::max<size_t>(1, images.size() / 16)) {
        Tensor z = vae.encode(images[i]);
        for (float v : z.v) acc += static_cast<double>(v) * v;
        count += z.numel();
    }
    double std_dev = std::sqrt(std::max(acc / static_cast<double>(count), 1e-12));
    vae.set_latent_scale(static_cast<float>(1.0 / std_dev));
    return losses;
}

double psnr_db(const Tensor& a, const Tensor& b) {
    check_contract(a.same_shape(b), "psnr: shape mismatch");
    double mse = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a.v[i]) - b.v[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse <= 0) return 999.0;
    return -10.0 * std::log10(mse);
}

}  // namespace egs

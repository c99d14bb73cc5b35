#include "core/audio_sr.hpp"

namespace egs {

AudioSRModel::AudioSRModel(uint64_t init_seed) {
    Rng rng(init_seed, 0xa5);
    const int filters[6] = {16, 32, 64, 64, 32, 1};
    int in_ch = 1;
    for (int i = 0; i < 6; ++i) {
        conv_[i] = Conv2dLayerT<float>(params_, "conv" + std::to_string(i + 1), in_ch, filters[i],
                                       3, 1, 1, rng);
        if (i < 5) bn_[i] = BatchNorm2dLayerT<float>(params_, "bn" + std::to_string(i + 1),
                                                     filters[i]);
        in_ch = filters[i];
    }
}

VarT<float> AudioSRModel::forward(const VarT<float>& x, bool training) {
    check_contract(x->value.ndim() == 3 && x->value.dim(0) == 1, "audio_sr: need [1,H,W] input");
    auto h = upsample_nearest(x, 1, 2);
    for (int i = 0; i < 5; ++i) h = bn_[i](relu(conv_[i](h)), training);
    return sigmoid(conv_[5](h));
}

Spectrogram AudioSRModel::upsample(const Spectrogram& s) {
    check_contract(s.time_frames() == 512 && s.freq_bins() == 512,
                   "audio_sr: expected a 512x512 spectrogram, got " + s.values.shape_str());
    NoGradGuard ng;
    Tensor in({1, 512, 512});
    std::copy(s.values.v.begin(), s.values.v.end(), in.v.begin());
    Tensor out = forward(leaf(in), false)->value;
    Spectrogram r = s;
    r.values = Tensor({512, 1024});
    std::copy(out.v.begin(), out.v.end(), r.values.v.begin());
    return r;
}

void AudioSRModel::save(const std::string& path,
                        const std::map<std::string, std::string>& meta) const {
    auto m = meta;
    m["optimizer"] = "adam";
    if (!m.count("lr")) m["lr"] = "0.001";
    save_checkpoint(path, "audio_sr", params_, m);
}

void AudioSRModel::load(const std::string& path) { load_checkpoint(path, "audio_sr", params_); }

std::vector<double> train_audio_sr(AudioSRModel& m,
                                   const std::vector<std::pair<Tensor, Tensor>>& pairs,
                                   const AudioSRTrainConfig& cfg) {
    check_contract(!pairs.empty(), "train_audio_sr: empty dataset");
    for (auto& [lo, hi] : pairs) {
        check_contract(lo.ndim() == 2 && hi.ndim() == 2 && hi.dim(0) == lo.dim(0) &&
                           hi.dim(1) == lo.dim(1) * 2,
                       "train_audio_sr: pair shapes must be (HxW, Hx2W)");
    }
    Rng rng(cfg.seed, 0x5a);
    AdamW opt(m.params(), cfg.lr);
    std::vector<double> epoch_losses;
    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int e = 0; e < cfg.epochs; ++e) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(static_cast<uint32_t>(i))]);
        double sum = 0.0;
        for (size_t idx : order) {
            const Tensor& lo = pairs[idx].first;
            const Tensor& hi = pairs[idx].second;
            int cs = std::min(cfg.crop, std::min(lo.dim(0), lo.dim(1)));
            int oy = lo.dim(0) > cs ? static_cast<int>(rng.below(lo.dim(0) - cs)) : 0;
            int ox = lo.dim(1) > cs ? static_cast<int>(rng.below(lo.dim(1) - cs)) : 0;
            Tensor in({1, cs, cs}), target({1, cs, cs * 2});
            for (int y = 0; y < cs; ++y)
                for (int x = 0; x < cs; ++x) in.at3(0, y, x) = lo.at2(oy + y, ox + x);
            for (int y = 0; y < cs; ++y)
                for (int x = 0; x < cs * 2; ++x) target.at3(0, y, x) = hi.at2(oy + y, 2 * ox + x);
            opt.zero_grad();
            auto loss = mse_loss(m.forward(leaf(in), true), leaf(target));
            backward(loss);
            opt.step();
            sum += loss->value.v[0];
        }
        epoch_losses.push_back(sum / static_cast<double>(order.size()));
    }
    return epoch_losses;
}

double grid_mse(const Tensor& a, const Tensor& b) {
    check_contract(a.same_shape(b), "grid_mse: shape mismatch");
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        double d = static_cast<double>(a.v[i]) - b.v[i];
        s += d * d;
    }
    return s / static_cast<double>(a.numel());
}

}  // namespace egs

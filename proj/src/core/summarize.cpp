#include "core/summarize.hpp"

#include <cmath>

#include "core/audio_spectro.hpp"

namespace egs {

SummarizerModel::SummarizerModel(uint64_t init_seed) {
    Rng rng(init_seed, 0x55);
    // Audio codec: 1-d strided convs expressed as [C,1,N] maps with 1x9 kernels.
    struct {
        int in, out, stride;
    } ac_spec[4] = {{1, 8, 8}, {8, 16, 8}, {16, 32, 8}, {32, 64, 4}};
    for (int i = 0; i < 4; ++i) {
        auto w = init_weight<float>({ac_spec[i].out, ac_spec[i].in, 1, 9}, rng);
        ac_[i].w = params_.add("ac" + std::to_string(i + 1) + ".w", std::move(w));
        ac_[i].b = params_.add("ac" + std::to_string(i + 1) + ".b", Tensor::zeros({ac_spec[i].out}));
        ac_[i].stride = ac_spec[i].stride;
        ac_[i].pad = 0;
    }
    ac_proj_ = LinearLayerT<float>(params_, "ac_proj", 64, kCodeDim, rng);

    int vc_ch[5] = {1, 8, 16, 32, 64};
    for (int i = 0; i < 4; ++i)
        vc_[i] = Conv2dLayerT<float>(params_, "vc" + std::to_string(i + 1), vc_ch[i], vc_ch[i + 1],
                                     3, 2, 1, rng);
    head1_ = LinearLayerT<float>(params_, "head1", 64 + kCodeDim, 256, rng);
    head2_ = LinearLayerT<float>(params_, "head2", 256, kTextDim, rng);
}

VarT<float> SummarizerModel::encode_audio(const VarT<float>& samples) const {
    check_contract(samples->value.ndim() == 3 && samples->value.dim(0) == 1 &&
                       samples->value.dim(1) == 1,
                   "codec: need [1,1,N] samples");
    auto h = samples;
    for (int i = 0; i < 4; ++i) {
        // conv2d with kernel 1x9 over the [C,1,N] layout
        h = relu(conv2d(h, ac_[i].w, ac_[i].b, ac_[i].stride, 0));
        // stride handling: conv2d strides both dims; height stays 1 because
        // the kernel height is 1 and the input height is 1.
    }
    // global mean over positions -> [64]
    auto tokens = chw_to_tokens(h);  // [N,64]
    return ac_proj_.vec(mean_rows(tokens));
}

AudioCode SummarizerModel::encode_audio_code(const Waveform& w) const {
    check_contract(static_cast<int>(w.samples.size()) == kClipSamples &&
                       w.sample_rate == kNativeSampleRate,
                   "codec: expected a native 10 s clip");
    NoGradGuard ng;
    Tensor in({1, 1, kClipSamples});
    std::copy(w.samples.begin(), w.samples.end(), in.v.begin());
    AudioCode code;
    code.values = encode_audio(leaf(in))->value;
    code.source = AudioSource::GroundTruth;
    return code;
}

VarT<float> SummarizerModel::predict(const VarT<float>& ev_image, const VarT<float>& code) const {
    check_contract(ev_image->value.ndim() == 3 && ev_image->value.dim(0) == 1,
                   "summarizer: need [1,H,W] embedding image");
    check_contract(code->value.numel() == kCodeDim, "summarizer: bad audio code length");
    auto h = avg_pool(ev_image, 4);  // 512 -> 128
    for (int i = 0; i < 4; ++i) h = relu(vc_[i](h));
    auto pooled = mean_rows(chw_to_tokens(h));  // [64]
    auto joint = concat_vec(pooled, code);
    return head2_.vec(relu(head1_.vec(joint)));
}

Tensor SummarizerModel::predict_summary(const Tensor& ev_resized, const AudioCode& code) const {
    NoGradGuard ng;
    Tensor img({1, ev_resized.dim(0), ev_resized.dim(1)});
    std::copy(ev_resized.v.begin(), ev_resized.v.end(), img.v.begin());
    return predict(leaf(img), leaf(code.values))->value;
}

void SummarizerModel::save(const std::string& path,
                           const std::map<std::string, std::string>& meta) const {
    auto m = meta;
    m["optimizer"] = "adam";
    if (!m.count("lr")) m["lr"] = "0.005";
    save_checkpoint(path, "summarizer", params_, m);
}

void SummarizerModel::load(const std::string& path) {
    load_checkpoint(path, "summarizer", params_);
}

std::vector<double> train_summarizer(SummarizerModel& m,
                                     const std::vector<SummarizerTrainItem>& items,
                                     const SummarizerTrainConfig& cfg) {
    check_contract(!items.empty(), "train_summarizer: empty dataset");
    for (const auto& it : items)
        check_contract(it.gt_text.numel() == SummarizerModel::kTextDim,
                       "train_summarizer: item lacks a 512-d text embedding");
    Rng rng(cfg.seed, 0x99);
    AdamW opt(m.params(), cfg.lr);
    std::vector<double> epoch_losses;
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    Tensor zero_code({SummarizerModel::kCodeDim});
    for (int e = 0; e < cfg.epochs; ++e) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(static_cast<uint32_t>(i))]);
        double sum = 0.0;
        for (size_t idx : order) {
            const auto& it = items[idx];
            Tensor img({1, it.ev_resized->dim(0), it.ev_resized->dim(1)});
            std::copy(it.ev_resized->v.begin(), it.ev_resized->v.end(), img.v.begin());
            Tensor audio({1, 1, kClipSamples});
            std::copy(it.audio->samples.begin(), it.audio->samples.end(), audio.v.begin());

            opt.zero_grad();
            // Both toggle regimes in one step: zero code and real code.
            auto img_node = leaf(img);
            auto code_on = m.encode_audio(leaf(audio));
            auto pred_on = m.predict(img_node, code_on);
            auto pred_off = m.predict(img_node, leaf(zero_code));
            auto target = leaf(it.gt_text);
            auto loss = scale(add(mse_loss(pred_on, target), mse_loss(pred_off, target)), 0.5f);
            backward(loss);
            opt.step();
            sum += loss->value.v[0];
        }
        epoch_losses.push_back(sum / static_cast<double>(order.size()));
    }
    return epoch_losses;
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    check_contract(a.numel() == b.numel(), "cosine: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        dot += static_cast<double>(a.v[i]) * b.v[i];
        na += static_cast<double>(a.v[i]) * a.v[i];
        nb += static_cast<double>(b.v[i]) * b.v[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double summarization_report(const SummarizerModel& m, const std::vector<SummaryReportItem>& items,
                            AudioSource source) {
    check_contract(!items.empty(), "summarization_report: empty item list");
    double sum = 0.0;
    AudioCode code;
    code.values = Tensor({SummarizerModel::kCodeDim});
    for (const auto& it : items) {
        if (source == AudioSource::None) {
            code.values.fill(0.0f);
            code.source = AudioSource::None;
        } else {
            check_contract(it.audio != nullptr, "summarization_report: missing audio");
            code = m.encode_audio_code(*it.audio);
            code.source = source;
        }
        Tensor pred = m.predict_summary(*it.ev_resized, code);
        sum += cosine_similarity(pred, it.gt_text);
    }
    return sum / static_cast<double>(items.size());
}

}  // namespace egs

#include "core/vaas.hpp"

#include <cmath>

namespace egs {

std::vector<AVPairSample> build_vaas_dataset(size_t corpus_clips, int n, uint64_t seed) {
    if (corpus_clips < 2) throw DataError("vaas dataset: need at least 2 clips");
    check_contract(n > 0, "vaas dataset: n must be positive");
    const int n_cross = static_cast<int>(std::llround(n / 4.0));
    const int n_shift = static_cast<int>(std::llround(n / 4.0));
    const int n_true = n - n_cross - n_shift;
    Rng rng(seed, 0x7a);
    std::vector<AVPairSample> out;
    out.reserve(static_cast<size_t>(n));
    auto pick = [&]() { return static_cast<int>(rng.below(static_cast<uint32_t>(corpus_clips))); };
    for (int i = 0; i < n_true; ++i) {
        AVPairSample s;
        s.audio_index = s.video_index = pick();
        s.label = 1;
        s.provenance = PairProvenance::TruePair;
        out.push_back(s);
    }
    for (int i = 0; i < n_cross; ++i) {
        AVPairSample s;
        s.video_index = pick();
        do {
            s.audio_index = pick();
        } while (s.audio_index == s.video_index);
        s.label = 0;
        s.provenance = PairProvenance::CrossVideo;
        out.push_back(s);
    }
    for (int i = 0; i < n_shift; ++i) {
        AVPairSample s;
        s.audio_index = s.video_index = pick();
        s.label = 0;
        s.provenance = PairProvenance::TimeShifted;
        s.shift_seconds = rng.uniform(1.0, 5.0);
        // 512 time rows cover 10 s.
        s.shift_rows = static_cast<int>(std::lround(s.shift_seconds * 512.0 / 10.0));
        out.push_back(s);
    }
    return out;
}

Tensor vaas_sample_audio(const AVPairSample& s, const VaasCorpusView& corpus) {
    const Tensor& src = (*corpus.audio)[static_cast<size_t>(s.audio_index)];
    if (s.shift_rows == 0) return src;
    const int rows = src.dim(0), cols = src.dim(1);
    Tensor out(src.shape);
    for (int r = 0; r < rows; ++r) {
        int sr = (r - s.shift_rows % rows + rows) % rows;
        std::copy(&src.v[static_cast<size_t>(sr) * cols], &src.v[static_cast<size_t>(sr) * cols] + cols,
                  &out.v[static_cast<size_t>(r) * cols]);
    }
    return out;
}

VaasModel::VaasModel(uint64_t init_seed) {
    Rng rng(init_seed, 0xaa);
    const int tokens = (kPoolTo / kPatch) * (kPoolTo / kPatch);
    patch_proj_ = LinearLayerT<float>(params_, "ext.patch", kPatch * kPatch, kFeatureDim, rng);
    pos_param_ = params_.add("ext.pos", Tensor::randn({tokens, kFeatureDim}, rng, 0.02f));
    for (int b = 0; b < 2; ++b) {
        std::string pre = "ext.blk" + std::to_string(b);
        ln1_[b] = LayerNormLayerT<float>(params_, pre + ".ln1", kFeatureDim);
        attn_[b] = SelfAttentionT<float>(params_, pre + ".attn", kFeatureDim, rng);
        ln2_[b] = LayerNormLayerT<float>(params_, pre + ".ln2", kFeatureDim);
        ff1_[b] = LinearLayerT<float>(params_, pre + ".ff1", kFeatureDim, kFeatureDim * 2, rng);
        ff2_[b] = LinearLayerT<float>(params_, pre + ".ff2", kFeatureDim * 2, kFeatureDim, rng);
    }
    const int widths[6] = {2 * kFeatureDim, 256, 128, 64, 32, 1};
    for (int i = 0; i < 5; ++i)
        head_[i] = LinearLayerT<float>(params_, "head.l" + std::to_string(i + 1), widths[i],
                                       widths[i + 1], rng);
}

VarT<float> VaasModel::extract(const VarT<float>& grid) const {
    const auto& g = grid->value;
    check_contract(g.ndim() == 2, "vaas: need a 2-d grid");
    check_contract(g.dim(0) % kPoolTo == 0 && g.dim(1) % kPoolTo == 0,
                   "vaas: grid dims must divide by " + std::to_string(kPoolTo));
    auto img = reshape(grid, {1, g.dim(0), g.dim(1)});
    int f = g.dim(0) / kPoolTo;
    if (f > 1) img = avg_pool(img, f);
    // 8x8 patch grid over the pooled 64x64 map.
    const int gp = kPoolTo / kPatch;
    Tensor tok({gp * gp, kPatch * kPatch});
    const auto& pv = img->value;
    for (int py = 0; py < gp; ++py)
        for (int px = 0; px < gp; ++px) {
            float* dst = &tok.v[static_cast<size_t>(py * gp + px) * kPatch * kPatch];
            for (int y = 0; y < kPatch; ++y)
                for (int x = 0; x < kPatch; ++x)
                    *dst++ = pv.at3(0, py * kPatch + y, px * kPatch + x);
        }
    auto tok_node = make_node<float>(
        std::move(tok), {img}, [gp](NodeT<float>& nd) {
            auto& gr = nd.parents[0]->ensure_grad();
            for (int py = 0; py < gp; ++py)
                for (int px = 0; px < gp; ++px) {
                    const float* src =
                        &nd.grad.v[static_cast<size_t>(py * gp + px) * kPatch * kPatch];
                    for (int y = 0; y < kPatch; ++y)
                        for (int x = 0; x < kPatch; ++x)
                            gr.at3(0, py * kPatch + y, px * kPatch + x) += *src++;
                }
        });
    auto x = add(patch_proj_(tok_node), pos_param_);
    for (int b = 0; b < 2; ++b) {
        x = attn_[b](ln1_[b](x));
        x = add(x, ff2_[b](relu(ff1_[b](ln2_[b](x)))));
    }
    return mean_rows(x);
}

Tensor VaasModel::extract_features(const Tensor& grid) const {
    NoGradGuard ng;
    return extract(leaf(grid))->value;
}

VarT<float> VaasModel::score_pair(const VarT<float>& audio, const VarT<float>& video) const {
    check_contract(audio->value.same_shape(video->value), "vaas: modality shape mismatch");
    auto fa = extract(audio);
    auto fv = extract(video);
    auto h = concat_vec(fa, fv);
    for (int i = 0; i < 4; ++i) h = relu(head_[i].vec(h));
    return sigmoid(head_[4].vec(h));
}

double VaasModel::score(const Tensor& audio, const Tensor& video) const {
    NoGradGuard ng;
    return score_pair(leaf(audio), leaf(video))->value.v[0];
}

uint64_t VaasModel::extractor_checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (auto& [name, p] : params_.items)
        if (name.rfind("ext.", 0) == 0) h = tensor_checksum(p->value, h);
    return h;
}

void VaasModel::save(const std::string& path,
                     const std::map<std::string, std::string>& meta) const {
    auto m = meta;
    m["optimizer"] = "adam";
    if (!m.count("lr")) m["lr"] = "0.0001";
    save_checkpoint(path, "vaas", params_, m);
}

void VaasModel::load(const std::string& path) { load_checkpoint(path, "vaas", params_); }

VaasTrainResult train_vaas(VaasModel& m, const std::vector<AVPairSample>& dataset,
                           const VaasCorpusView& corpus, const VaasTrainConfig& cfg) {
    check_contract(!dataset.empty(), "train_vaas: empty dataset");
    bool has_pos = false, has_neg = false;
    for (const auto& s : dataset) (s.label ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DataError("train_vaas: degenerate single-class dataset");

    Rng rng(cfg.seed, 0x77);
    // Deterministic shuffled split.
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.below(static_cast<uint32_t>(i))]);
    size_t holdout = static_cast<size_t>(dataset.size() * cfg.holdout_fraction);
    std::vector<size_t> test(order.begin(), order.begin() + holdout);
    std::vector<size_t> train(order.begin() + holdout, order.end());
    check_contract(!train.empty(), "train_vaas: empty training split");

    AdamW opt(m.params(), cfg.lr);
    VaasTrainResult result;
    for (int e = 0; e < cfg.epochs; ++e) {
        for (size_t i = train.size(); i > 1; --i)
            std::swap(train[i - 1], train[rng.below(static_cast<uint32_t>(i))]);
        double sum = 0.0;
        for (size_t idx : train) {
            const auto& s = dataset[idx];
            Tensor audio = vaas_sample_audio(s, corpus);
            const Tensor& video = (*corpus.video)[static_cast<size_t>(s.video_index)];
            opt.zero_grad();
            auto pred = m.score_pair(leaf(audio), leaf(video));
            Tensor target({1});
            target.v[0] = static_cast<float>(s.label);
            auto loss = mse_loss(pred, leaf(target));
            backward(loss);
            opt.step();
            sum += loss->value.v[0];
        }
        result.epoch_losses.push_back(sum / static_cast<double>(train.size()));
    }

    int correct = 0;
    for (size_t idx : test) {
        const auto& s = dataset[idx];
        Tensor audio = vaas_sample_audio(s, corpus);
        double sc = m.score(audio, (*corpus.video)[static_cast<size_t>(s.video_index)]);
        if ((sc > cfg.threshold) == (s.label == 1)) ++correct;
    }
    result.holdout_count = static_cast<int>(test.size());
    result.holdout_accuracy = test.empty() ? 0.0 : 100.0 * correct / test.size();
    return result;
}

double vaas_aggregate(const std::vector<double>& scores, double threshold) {
    if (scores.empty()) throw DataError("vaas_aggregate: empty list");
    int above = 0;
    for (double s : scores)
        if (s > threshold) ++above;
    return 100.0 * above / static_cast<double>(scores.size());
}

}  // namespace egs

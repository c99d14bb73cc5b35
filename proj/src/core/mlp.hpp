#pragma once

// Two-layer MLP mapping the (normalized) mean video embedding to the
// 512-d conditioning vector used by the denoiser, trained with MSE.

#include <map>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/layers.hpp"

namespace egs {

class VideoToTextMlp {
public:
    static constexpr int kDim = 512;

    explicit VideoToTextMlp(uint64_t init_seed = 6) {
        Rng rng(init_seed, 0x17);
        l1_ = LinearLayerT<float>(params_, "l1", kDim, kDim, rng);
        l2_ = LinearLayerT<float>(params_, "l2", kDim, kDim, rng);
    }

    VarT<float> forward(const VarT<float>& mean_emb) const {
        check_contract(mean_emb->value.numel() == kDim, "mlp: input must be 512-d");
        return l2_.vec(relu(l1_.vec(mean_emb)));
    }

    Tensor apply(const Tensor& mean_emb) const {
        NoGradGuard ng;
        return forward(leaf(mean_emb))->value;
    }

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    void save(const std::string& path, const std::map<std::string, std::string>& meta = {}) const {
        auto m = meta;
        m["optimizer"] = "adam";
        save_checkpoint(path, "video_to_text_mlp", params_, m);
    }
    void load(const std::string& path) { load_checkpoint(path, "video_to_text_mlp", params_); }

private:
    ParamStore params_;
    LinearLayerT<float> l1_, l2_;
};

std::vector<double> train_video_to_text_mlp(VideoToTextMlp& mlp,
                                            const std::vector<Tensor>& mean_embeddings,
                                            const std::vector<Tensor>& targets, int epochs,
                                            float lr, uint64_t seed);

}  // namespace egs

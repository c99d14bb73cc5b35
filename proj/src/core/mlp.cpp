#include "core/mlp.hpp"

namespace egs {

std::vector<double> train_video_to_text_mlp(VideoToTextMlp& mlp,
                                            const std::vector<Tensor>& mean_embeddings,
                                            const std::vector<Tensor>& targets, int epochs,
                                            float lr, uint64_t seed) {
    check_contract(mean_embeddings.size() == targets.size() && !targets.empty(),
                   "mlp: bad training set");
    Rng rng(seed, 0x3b);
    AdamW opt(mlp.params(), lr);
    std::vector<double> losses;
    std::vector<size_t> order(targets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int e = 0; e < epochs; ++e) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(static_cast<uint32_t>(i))]);
        double sum = 0.0;
        for (size_t idx : order) {
            opt.zero_grad();
            auto loss = mse_loss(mlp.forward(leaf(mean_embeddings[idx])), leaf(targets[idx]));
            backward(loss);
            opt.step();
            sum += loss->value.v[0];
        }
        losses.push_back(sum / static_cast<double>(order.size()));
    }
    return losses;
}

}  // namespace egs

#include "core/syncronet.hpp"

namespace egs {

Tensor fuse_hint(const Tensor& x, const VideoEmbedding& ev, const SyncroNet& m) {
    check_contract(ev.resized.numel() > 0, "fuse_hint: e_v.resized missing");
    NoGradGuard ng;
    Tensor img = ev.resized;
    img.shape = {1, ev.resized.dim(0), ev.resized.dim(1)};
    Tensor hint = m.hint_forward(leaf(img))->value;
    check_contract(hint.same_shape(x), "fuse_hint: shape mismatch " + x.shape_str() + " vs " +
                                           hint.shape_str());
    Tensor out(x.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = x.v[i] + hint.v[i];
    return out;
}

std::vector<double> train_syncronet(SyncroNet& m, const UNet& frozen, const NoiseSchedule& ns,
                                    const std::vector<SyncroTrainItem>& data,
                                    const SyncroTrainConfig& cfg) {
    check_contract(!data.empty(), "train_syncronet: empty dataset");
    const uint64_t frozen_before = frozen.params().checksum();
    m.set_cross_attention(cfg.cross_attention);

    AdamW opt(m.params(), cfg.lr, cfg.weight_decay);
    Rng rng(cfg.seed, 0x51);
    std::vector<double> epoch_losses;

    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates under the run seed.
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = rng.below(static_cast<uint32_t>(i));
            std::swap(order[i - 1], order[j]);
        }
        double sum = 0.0;
        for (size_t step = 0; step < order.size(); ++step) {
            const auto& item = data[order[step]];
            int t = static_cast<int>(rng.below(static_cast<uint32_t>(ns.total_steps)));
            Tensor eps(item.z0.shape);
            for (auto& v : eps.v) v = static_cast<float>(rng.gaussian());
            Tensor z_t = forward_diffuse(ns, item.z0, t, eps);

            opt.zero_grad();
            VideoEmbedding ev;
            ev.native = item.ev_rows;
            ev.resized = item.ev_resized;
            if (cfg.fps_effective < kNativeFps) ev = reduce_fps(ev, cfg.fps_effective);
            auto controls = m.generate_controls(leaf(z_t), ev, t);
            auto ctx = leaf(UNet::ensure_rows(item.c_t));
            auto pred = frozen.forward_with_control_vars(leaf(z_t), t, ctx, controls);
            auto loss = mse_loss(pred, leaf(eps));
            backward(loss);
            opt.step();
            sum += loss->value.v[0];
        }
        epoch_losses.push_back(sum / static_cast<double>(order.size()));
        if (!cfg.checkpoint_dir.empty()) {
            save_syncronet(cfg.checkpoint_dir + "/syncronet_epoch" + std::to_string(epoch + 1) +
                               ".egsckpt",
                           m, frozen,
                           {{"epoch", std::to_string(epoch + 1)},
                            {"loss", std::to_string(epoch_losses.back())}});
        }
    }

    check_contract(frozen.params().checksum() == frozen_before,
                   "train_syncronet: frozen denoiser parameters were mutated");
    return epoch_losses;
}

void save_syncronet(const std::string& path, const SyncroNet& m, const UNet& frozen,
                    const std::map<std::string, std::string>& extra_meta) {
    std::map<std::string, std::string> meta = extra_meta;
    meta["optimizer"] = "adamw";
    meta["lr"] = meta.count("lr") ? meta["lr"] : "0.0001";
    meta["frozen_checksum"] = std::to_string(frozen.params().checksum());
    meta["cross_attention"] = m.cross_attention() ? "1" : "0";
    save_checkpoint(path, "syncronet", m.params(), meta);
}

void load_syncronet(const std::string& path, SyncroNet& m, const UNet& frozen) {
    auto meta = load_checkpoint(path, "syncronet", m.params());
    auto it = meta.find("frozen_checksum");
    check_contract(it != meta.end(), "syncronet checkpoint: missing frozen checksum");
    check_contract(it->second == std::to_string(frozen.params().checksum()),
                   "syncronet checkpoint: frozen-model checksum mismatch (checkpoint was trained "
                   "against a different denoiser)");
    auto ca = meta.find("cross_attention");
    if (ca != meta.end()) m.set_cross_attention(ca->second == "1");
}

}  // namespace egs

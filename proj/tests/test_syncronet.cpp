#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "core/syncronet.hpp"

using namespace egs;

namespace {

UNetConfig small_cfg() {
    UNetConfig cfg;
    cfg.latent_size = 16;
    cfg.base_channels = 8;
    cfg.ctx_dim = 512;  // video rows keep their native width
    cfg.temb_dim = 32;
    return cfg;
}

VideoEmbedding small_ev(Rng& rng, int rows = 40) {
    VideoEmbedding ev;
    ev.fps = 30;
    ev.native = Tensor::randn({rows, 512}, rng, 0.3f);
    // hint encoder expects an 8x-upsampled latent-size image: 128x128 here
    ev.resized = resize_grid(ev.native, 128, 128, false);
    return ev;
}

}  // namespace

TEST_CASE("init_from_denoiser copies encoder parameters bit-equal, zero convs stay zero") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 21);
    SyncroNet syncro(cfg, 22);
    syncro.init_from_denoiser(unet);
    int copied = 0, zero_convs = 0;
    for (auto& [name, p] : syncro.params().items) {
        auto src = unet.params().find(name);
        if (src) {
            CHECK(p->value.v == src->value.v);
            ++copied;
        }
        if (name.rfind("zc", 0) == 0) {
            for (float v : p->value.v) CHECK(v == 0.0f);
            ++zero_convs;
        }
    }
    CHECK(copied > 100);           // encoder + time embedding
    CHECK(zero_convs == 2 * 13);   // weight + bias per injection point
}

TEST_CASE("freshly initialized branch emits 13 exactly-zero control signals") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 23);
    SyncroNet syncro(cfg, 24);
    syncro.init_from_denoiser(unet);
    Rng rng(25);
    VideoEmbedding ev = small_ev(rng);
    Tensor z = Tensor::randn({4, 16, 16}, rng);
    ControlSignalSet cs = syncro.controls_for(z, ev, 77);
    REQUIRE(cs.signals.size() == 13);
    for (const auto& s : cs.signals)
        for (float v : s.v) CHECK(v == 0.0f);

    // Additive injection of zeros leaves the denoiser output bit-equal.
    Tensor ctx = Tensor::randn({1, 512}, rng);
    Tensor with = unet.predict_eps(z, 77, &ctx, &cs);
    Tensor without = unet.predict_eps(z, 77, &ctx, nullptr);
    CHECK(with.v == without.v);
}

TEST_CASE("control signal shapes follow the 12-skip + middle layout") {
    UNetConfig cfg = small_cfg();
    SyncroNet syncro(cfg, 26);
    Rng rng(27);
    VideoEmbedding ev = small_ev(rng);
    Tensor z = Tensor::randn({4, 16, 16}, rng);
    ControlSignalSet cs = syncro.controls_for(z, ev, 5);
    int w0 = cfg.width(0), w1 = cfg.width(1), w2 = cfg.width(2), w3 = cfg.width(3);
    int r0 = 16, r1 = 8, r2 = 4, r3 = 2;
    std::vector<std::vector<int>> want = {
        {w0, r0, r0}, {w0, r0, r0}, {w0, r0, r0}, {w0, r1, r1}, {w1, r1, r1},
        {w1, r1, r1}, {w1, r2, r2}, {w2, r2, r2}, {w2, r2, r2}, {w2, r3, r3},
        {w3, r3, r3}, {w3, r3, r3}, {w3, r3, r3}};
    for (int i = 0; i < 13; ++i) CHECK(cs.signals[i].shape == want[i]);
}

TEST_CASE("fuse_hint: zero-probe identity, zero input, compositional oracle") {
    UNetConfig cfg = small_cfg();
    SyncroNet syncro(cfg, 28);
    Rng rng(29);
    VideoEmbedding ev = small_ev(rng);

    // Zero out the hint encoder's last conv: hint becomes exactly zero.
    SyncroNet zeroed(cfg, 28);
    for (auto& [name, p] : zeroed.params().items)
        if (name.rfind("hint.c4", 0) == 0) p->value.fill(0.0f);
    Tensor x = Tensor::randn({cfg.base_channels, 16, 16}, rng);
    Tensor fused0 = fuse_hint(x, ev, zeroed);
    CHECK(fused0.v == x.v);

    Tensor zero_x(x.shape);
    Tensor hint_only = fuse_hint(zero_x, ev, syncro);
    // x = 0: result equals an independently computed hint forward pass.
    NoGradGuard ng;
    Tensor img = ev.resized;
    img.shape = {1, 128, 128};
    Tensor expect = syncro.hint_forward(leaf(img))->value;
    CHECK(hint_only.v == expect.v);

    Tensor fused = fuse_hint(x, ev, syncro);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(fused.v[i] == x.v[i] + expect.v[i]);

    Tensor bad = Tensor::randn({cfg.base_channels, 8, 8}, rng);
    CHECK_THROWS_AS(fuse_hint(bad, ev, syncro), ContractError);
}

TEST_CASE("missing resized embedding is rejected") {
    UNetConfig cfg = small_cfg();
    SyncroNet syncro(cfg, 30);
    Rng rng(31);
    VideoEmbedding ev;
    ev.native = Tensor::randn({10, 512}, rng);
    Tensor z = Tensor::randn({4, 16, 16}, rng);
    CHECK_THROWS_AS(syncro.controls_for(z, ev, 1), ContractError);
}

TEST_CASE("cross-attention ablation flag keeps every shape contract") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 32);
    SyncroNet syncro(cfg, 33);
    syncro.init_from_denoiser(unet);
    syncro.set_cross_attention(false);
    Rng rng(34);
    VideoEmbedding ev = small_ev(rng);
    Tensor z = Tensor::randn({4, 16, 16}, rng);
    ControlSignalSet cs = syncro.controls_for(z, ev, 50);
    REQUIRE(cs.signals.size() == 13);
    Tensor out = unet.predict_eps(z, 50, nullptr, &cs);
    CHECK(out.shape == z.shape);
}

TEST_CASE("train_syncronet: smoke run decreases training-batch loss, freeze contract holds") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 35);
    unet.params().set_trainable(false);
    uint64_t frozen_before = unet.params().checksum();

    Rng rng(36);
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    std::vector<SyncroTrainItem> items;
    for (int i = 0; i < 8; ++i) {
        SyncroTrainItem it;
        it.z0 = Tensor::randn({4, 16, 16}, rng, 0.7f);
        it.ev_rows = Tensor::randn({40, 512}, rng, 0.3f);
        it.ev_resized = resize_grid(it.ev_rows, 128, 128, false);
        it.c_t = Tensor::randn({512}, rng, 0.2f);
        items.push_back(std::move(it));
    }

    SyncroNet syncro(cfg, 37);
    syncro.init_from_denoiser(unet);

    // Reference loss on a fixed evaluation batch at init.
    auto eval_loss = [&](SyncroNet& m) {
        double sum = 0.0;
        Rng erng(99);
        NoGradGuard ng;
        for (const auto& it : items) {
            int t = 300 + static_cast<int>(erng.below(400));
            Tensor eps(it.z0.shape);
            for (auto& v : eps.v) v = static_cast<float>(erng.gaussian());
            Tensor z_t = forward_diffuse(ns, it.z0, t, eps);
            VideoEmbedding ev;
            ev.native = it.ev_rows;
            ev.resized = it.ev_resized;
            ControlSignalSet cs = m.controls_for(z_t, ev, t);
            Tensor ctx = UNet::ensure_rows(it.c_t);
            Tensor pred = unet.predict_eps(z_t, t, &ctx, &cs);
            double mse = 0.0;
            for (int64_t i = 0; i < eps.numel(); ++i) {
                double d = double(pred.v[i]) - eps.v[i];
                mse += d * d;
            }
            sum += mse / static_cast<double>(eps.numel());
        }
        return sum / items.size();
    };
    double loss_init = eval_loss(syncro);

    SyncroTrainConfig tc;
    tc.epochs = 1;
    tc.lr = 2e-3f;
    tc.seed = 4;
    auto losses = train_syncronet(syncro, unet, ns, items, tc);
    REQUIRE(losses.size() == 1);
    CHECK(std::isfinite(losses[0]));
    double loss_after = eval_loss(syncro);
    CHECK(loss_after < loss_init);
    CHECK(unet.params().checksum() == frozen_before);
}

TEST_CASE("syncronet checkpoints record and verify the frozen checksum") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 38);
    SyncroNet syncro(cfg, 39);
    syncro.init_from_denoiser(unet);
    auto path = std::filesystem::temp_directory_path() / "egs_syncro_test.egsckpt";
    save_syncronet(path.string(), syncro, unet, {{"lr", "0.0001"}});

    auto meta = read_checkpoint_metadata(path.string());
    CHECK(meta.at("optimizer") == "adamw");
    CHECK(meta.at("lr") == "0.0001");
    CHECK(meta.count("frozen_checksum") == 1);

    SyncroNet reloaded(cfg, 40);
    load_syncronet(path.string(), reloaded, unet);  // ok against the same denoiser

    UNet other(cfg, 41);
    SyncroNet reject(cfg, 42);
    CHECK_THROWS_AS(load_syncronet(path.string(), reject, other), ContractError);
    std::filesystem::remove(path);
}

TEST_CASE("per-epoch checkpoints are written when a directory is configured") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 43);
    unet.params().set_trainable(false);
    NoiseSchedule ns = NoiseSchedule::linear(100);
    Rng rng(44);
    std::vector<SyncroTrainItem> items(1);
    items[0].z0 = Tensor::randn({4, 16, 16}, rng);
    items[0].ev_rows = Tensor::randn({10, 512}, rng);
    items[0].ev_resized = resize_grid(items[0].ev_rows, 128, 128, false);
    items[0].c_t = Tensor::randn({512}, rng);

    SyncroNet syncro(cfg, 45);
    syncro.init_from_denoiser(unet);
    SyncroTrainConfig tc;
    tc.epochs = 2;
    tc.lr = 1e-4f;
    auto dir = std::filesystem::temp_directory_path() / "egs_syncro_epochs";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    tc.checkpoint_dir = dir.string();
    auto losses = train_syncronet(syncro, unet, ns, items, tc);
    CHECK(losses.size() == 2);
    CHECK(std::filesystem::exists(dir / "syncronet_epoch1.egsckpt"));
    CHECK(std::filesystem::exists(dir / "syncronet_epoch2.egsckpt"));
    auto meta = read_checkpoint_metadata((dir / "syncronet_epoch2.egsckpt").string());
    CHECK(meta.at("epoch") == "2");
    std::filesystem::remove_all(dir);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "core/unet.hpp"
#include "core/vae.hpp"

using namespace egs;

namespace {

UNetConfig small_cfg() {
    UNetConfig cfg;
    cfg.latent_size = 16;
    cfg.base_channels = 8;
    cfg.ctx_dim = 32;
    cfg.temb_dim = 32;
    return cfg;
}

}  // namespace

TEST_CASE("unet: eps output shape matches the latent, rejects bad latents") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 1);
    Rng rng(2);
    Tensor z = Tensor::randn({4, 16, 16}, rng);
    Tensor ctx = Tensor::randn({1, 32}, rng);
    Tensor eps = unet.predict_eps(z, 100, &ctx);
    CHECK(eps.shape == z.shape);
    CHECK(eps.all_finite());

    Tensor bad = Tensor::randn({4, 8, 8}, rng);
    CHECK_THROWS_AS(unet.predict_eps(bad, 100, &ctx), ContractError);
}

TEST_CASE("unet: rejects control sets with count != 13 or wrong shapes") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 1);
    Rng rng(3);
    Tensor z = Tensor::randn({4, 16, 16}, rng);
    ControlSignalSet cs;
    cs.signals.assign(12, Tensor({8, 16, 16}));
    CHECK_THROWS_AS(unet.predict_eps(z, 1, nullptr, &cs), ContractError);
    cs.signals.assign(14, Tensor({8, 16, 16}));
    CHECK_THROWS_AS(unet.predict_eps(z, 1, nullptr, &cs), ContractError);

    // Right count but a wrong shape somewhere.
    int w0 = cfg.width(0), w1 = cfg.width(1), w2 = cfg.width(2), w3 = cfg.width(3);
    int r0 = 16, r1 = 8, r2 = 4, r3 = 2;
    std::vector<Tensor> ok = {
        Tensor({w0, r0, r0}), Tensor({w0, r0, r0}), Tensor({w0, r0, r0}), Tensor({w0, r1, r1}),
        Tensor({w1, r1, r1}), Tensor({w1, r1, r1}), Tensor({w1, r2, r2}), Tensor({w2, r2, r2}),
        Tensor({w2, r2, r2}), Tensor({w2, r3, r3}), Tensor({w3, r3, r3}), Tensor({w3, r3, r3}),
        Tensor({w3, r3, r3})};
    cs.signals = ok;
    Tensor good = unet.predict_eps(z, 1, nullptr, &cs);  // all-zero controls accepted
    Tensor none = unet.predict_eps(z, 1, nullptr, nullptr);
    CHECK(good.v == none.v);  // zero additive injection is exact

    cs.signals[4] = Tensor({w1, r2, r2});
    CHECK_THROWS_AS(unet.predict_eps(z, 1, nullptr, &cs), ContractError);
}

TEST_CASE("unet: checkpoint round trip preserves outputs bit-for-bit") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 7);
    Rng rng(8);
    // Perturb so the saved state is not the constructor state.
    for (auto& [name, p] : unet.params().items)
        for (auto& v : p->value.v) v += 0.01f * static_cast<float>(rng.gaussian());
    Tensor z = Tensor::randn({4, 16, 16}, rng);
    Tensor out1 = unet.predict_eps(z, 55, nullptr);

    auto path = std::filesystem::temp_directory_path() / "egs_unet_test.egsckpt";
    save_checkpoint(path.string(), "unet", unet.params(), {{"epoch", "1"}});
    UNet other(cfg, 999);  // different init
    auto meta = load_checkpoint(path.string(), "unet", other.params());
    CHECK(meta.at("epoch") == "1");
    Tensor out2 = other.predict_eps(z, 55, nullptr);
    CHECK(out1.v == out2.v);

    UNetConfig bigger = cfg;
    bigger.base_channels = 16;
    UNet wrong(bigger, 1);
    CHECK_THROWS_AS(load_checkpoint(path.string(), "unet", wrong.params()), ContractError);
    std::filesystem::remove(path);
}

TEST_CASE("unet: sampling determinism with fixed seed and checkpoint") {
    UNetConfig cfg = small_cfg();
    UNet unet(cfg, 7);
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    Rng rng(11);
    Tensor init = Tensor::randn({4, 16, 16}, rng);
    auto model = [&](const Tensor& z, int t) { return unet.predict_eps(z, t, nullptr); };
    Tensor a = ddim_sample(ns, model, init, 10);
    Tensor b = ddim_sample(ns, model, init, 10);
    CHECK(a.v == b.v);
}

TEST_CASE("vae: 512x512 -> 4x64x64 -> 512x512 with [0,1] outputs") {
    Vae vae(1);
    Rng rng(12);
    Tensor img = Tensor::uniform({512, 512}, rng, 0.0f, 1.0f);
    Tensor z = vae.encode(img);
    REQUIRE(z.shape == std::vector<int>({4, 64, 64}));
    Tensor back = vae.decode(z);
    REQUIRE(back.shape == std::vector<int>({512, 512}));
    for (float v : back.v) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    Tensor bad = Tensor::uniform({100, 100}, rng, 0.0f, 1.0f);
    CHECK_THROWS_AS(vae.encode(bad), ContractError);
    Tensor badz = Tensor::randn({3, 64, 64}, rng);
    CHECK_THROWS_AS(vae.decode(badz), ContractError);
}

TEST_CASE("vae: encode is the mean path (deterministic)") {
    Vae vae(2);
    Rng rng(13);
    Tensor img = Tensor::uniform({256, 256}, rng, 0.0f, 1.0f);
    Tensor z1 = vae.encode(img);
    Tensor z2 = vae.encode(img);
    CHECK(z1.v == z2.v);
}

TEST_CASE("vae: short crop training reduces reconstruction loss") {
    Vae vae(3);
    Rng rng(14);
    // Structured images: smooth ramps with a bright band (cheap stand-ins).
    std::vector<Tensor> images;
    for (int k = 0; k < 4; ++k) {
        Tensor img({128, 128});
        for (int y = 0; y < 128; ++y)
            for (int x = 0; x < 128; ++x)
                img.at2(y, x) = 0.1f + 0.2f * (y % (20 + k)) / 20.0f +
                                ((x > 30 + 5 * k && x < 50 + 5 * k) ? 0.5f : 0.0f);
        images.push_back(std::move(img));
    }
    VaeTrainConfig tc;
    tc.steps = 60;
    tc.crop = 64;
    tc.full_steps = 0;
    tc.lr = 2e-3f;
    tc.seed = 5;
    auto losses = train_vae(vae, images, tc);
    REQUIRE(losses.size() == 60);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 10; ++i) head += losses[i];
    for (size_t i = losses.size() - 10; i < losses.size(); ++i) tail += losses[i];
    CHECK(tail < head);
    CHECK(vae.latent_scale() > 0.0f);
}

TEST_CASE("psnr helper") {
    Tensor a = Tensor::full({8, 8}, 0.5f);
    Tensor b = a;
    CHECK(psnr_db(a, b) > 300.0);
    b.v[0] = 0.6f;
    CHECK(psnr_db(a, b) < 60.0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/diffusion.hpp"
#include "core/unet.hpp"

using namespace egs;

TEST_CASE("schedule: betas in (0,1), alpha_bar strictly decreasing") {
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    CHECK(ns.total_steps == 1000);
    CHECK(ns.betas.front() == doctest::Approx(1e-4));
    CHECK(ns.betas.back() == doctest::Approx(2e-2));
    for (int i = 1; i < 1000; ++i) CHECK(ns.alphas_cumprod[i] < ns.alphas_cumprod[i - 1]);
    CHECK(ns.alphas_cumprod.back() > 0.0);
    CHECK(ns.alpha_bar(-1) == 1.0);
}

TEST_CASE("forward_diffuse: endpoints and exact eps=0 case") {
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    Rng rng(1);
    Tensor z0 = Tensor::randn({4, 8, 8}, rng);
    Tensor zero(z0.shape);
    Tensor out = forward_diffuse(ns, z0, 0, zero);
    // alpha_bar(0) ~ 1 for the default schedule
    CHECK(max_abs_diff(out, z0) < 0.05);

    Tensor eps = Tensor::randn(z0.shape, rng);
    Tensor exact = forward_diffuse(ns, z0, 500, zero);
    float c0 = static_cast<float>(std::sqrt(ns.alpha_bar(500)));
    for (int64_t i = 0; i < z0.numel(); ++i) CHECK(exact.v[i] == c0 * z0.v[i]);

    CHECK_THROWS_AS(forward_diffuse(ns, z0, 1000, eps), ContractError);
    CHECK_THROWS_AS(forward_diffuse(ns, z0, -1, eps), ContractError);
}

TEST_CASE("forward_diffuse: Monte-Carlo moments at t=200") {
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    Rng rng(2);
    Tensor z0 = Tensor::randn({2, 4, 4}, rng);
    const int draws = 10000;
    double ab = ns.alpha_bar(200);
    double c0 = std::sqrt(ab), want_var = 1.0 - ab;
    double sum = 0.0, sumsq = 0.0;
    int64_t n = z0.numel();
    for (int d = 0; d < draws; ++d) {
        Tensor eps(z0.shape);
        for (auto& v : eps.v) v = static_cast<float>(rng.gaussian());
        Tensor x = forward_diffuse(ns, z0, 200, eps);
        for (int64_t i = 0; i < n; ++i) {
            double dev = x.v[i] - c0 * z0.v[i];
            sum += dev;
            sumsq += dev * dev;
        }
    }
    double total = static_cast<double>(draws) * n;
    double mean = sum / total;
    double var = sumsq / total - mean * mean;
    CHECK(std::abs(mean) < 3.0 * std::sqrt(want_var / total));
    CHECK(std::abs(var - want_var) < 3.0 * want_var * std::sqrt(2.0 / total));
}

TEST_CASE("ddim timesteps: descending, inclusive endpoints, spacing") {
    auto ts = ddim_timesteps(1000, 20);
    REQUIRE(ts.size() == 20);
    CHECK(ts.front() == 999);
    CHECK(ts.back() == 0);
    for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    CHECK_THROWS_AS(ddim_timesteps(1000, 1), ContractError);
}

TEST_CASE("ddim update: schedule violations rejected, eps=0 behavior") {
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    Rng rng(3);
    Tensor z = Tensor::randn({4, 8, 8}, rng);
    Tensor eps(z.shape);
    CHECK_THROWS_AS(ddim_update(ns, z, eps, 100, 100), ContractError);
    CHECK_THROWS_AS(ddim_update(ns, z, eps, 100, 200), ContractError);
    // eps = 0: update rescales z0_hat = z/sqrt(ab_t) to sqrt(ab_prev).
    Tensor out = ddim_update(ns, z, eps, 500, 250);
    float f = static_cast<float>(std::sqrt(ns.alpha_bar(250) / ns.alpha_bar(500)));
    for (int64_t i = 0; i < z.numel(); ++i)
        CHECK(out.v[i] == doctest::Approx(z.v[i] * f).epsilon(1e-5));
}

TEST_CASE("ldm_loss: stubbed model gives exact zero and unit-level noise loss") {
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    Rng rng(4);
    Tensor z0 = Tensor::randn({4, 8, 8}, rng);
    Tensor eps = Tensor::randn(z0.shape, rng);

    // Stub that returns the true noise.
    Tensor eps_copy = eps;
    auto perfect = [&](const VarT<float>&, int) { return leaf(eps_copy); };
    auto loss0 = ldm_loss(ns, perfect, z0, 300, eps);
    CHECK(loss0->value.v[0] == 0.0f);

    // Stub that returns zero: loss ~ E[eps^2] = 1, within 3 sigma for the batch.
    auto zero_model = [&](const VarT<float>& z_t, int) {
        return leaf(Tensor(z_t->value.shape));
    };
    double acc = 0.0;
    const int batch = 64;
    for (int i = 0; i < batch; ++i) {
        Tensor e(z0.shape);
        for (auto& v : e.v) v = static_cast<float>(rng.gaussian());
        acc += ldm_loss(ns, zero_model, z0, 300, e)->value.v[0];
    }
    double mean = acc / batch;
    double sigma = std::sqrt(2.0 / static_cast<double>(z0.numel()) / batch);  // var(chi2)/n
    CHECK(std::abs(mean - 1.0) < 3.0 * sigma);
}

TEST_CASE("ldm_loss gradient matches finite differences on a tiny double model") {
    // Tiny double-precision denoiser assembled from the real blocks.
    UNetConfig tiny;
    tiny.latent_size = 8;
    tiny.base_channels = 4;
    tiny.ctx_dim = 16;
    tiny.temb_dim = 16;
    UNetT<double> unet(tiny, 55);
    Rng rr(66);
    for (auto& [name, p] : unet.params().items)
        for (auto& v : p->value.v) v += 0.05 * rr.gaussian();

    NoiseSchedule ns = NoiseSchedule::linear(1000);
    Rng rng(5);
    TensorD z0 = TensorD::randn({4, 8, 8}, rng);
    TensorD eps = TensorD::randn({4, 8, 8}, rng);
    TensorD ctx = TensorD::randn({1, 16}, rng);
    const int t = 412;

    double ab = ns.alpha_bar(t);
    TensorD z_t(z0.shape);
    for (int64_t i = 0; i < z0.numel(); ++i)
        z_t.v[i] = std::sqrt(ab) * z0.v[i] + std::sqrt(1 - ab) * eps.v[i];

    auto loss_fn = [&] {
        return mse_loss(unet.forward(leaf(z_t), t, leaf(ctx)), leaf(eps));
    };
    auto probe = unet.params().find("enc.b2.conv1.w");
    REQUIRE(probe);
    unet.params().zero_grad();
    auto loss = loss_fn();
    backward(loss);
    TensorD grad = probe->grad;
    Rng pick(7);
    for (int s = 0; s < 3; ++s) {
        int64_t idx = pick.below(static_cast<uint32_t>(probe->value.numel()));
        double keep = probe->value.v[idx];
        const double h = 1e-5;
        probe->value.v[idx] = keep + h;
        double fp = loss_fn()->value.v[0];
        probe->value.v[idx] = keep - h;
        double fm = loss_fn()->value.v[0];
        probe->value.v[idx] = keep;
        double fd = (fp - fm) / (2 * h);
        double an = grad.v[idx];
        CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}) < 1e-4);
    }
}

TEST_CASE("ddim_sample is a pure function of seed and model") {
    NoiseSchedule ns = NoiseSchedule::linear(1000);
    auto model = [](const Tensor& z, int) {
        Tensor eps(z.shape);
        for (int64_t i = 0; i < z.numel(); ++i) eps.v[i] = 0.1f * z.v[i];
        return eps;
    };
    Rng rng(6);
    Tensor init = Tensor::randn({2, 4, 4}, rng);
    Tensor a = ddim_sample(ns, model, init, 20);
    Tensor b = ddim_sample(ns, model, init, 20);
    CHECK(a.v == b.v);
}

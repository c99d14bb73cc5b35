#include "core/diffusion.hpp"

#include <cmath>

namespace egs {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_lo, double beta_hi) {
    NoiseSchedule ns;
    ns.total_steps = steps;
    ns.betas.resize(steps);
    ns.alphas_cumprod.resize(steps);
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
        double b = steps == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * i / (steps - 1);
        ns.betas[i] = b;
        prod *= 1.0 - b;
        ns.alphas_cumprod[i] = prod;
    }
    ns.validate();
    return ns;
}

void NoiseSchedule::validate() const {
    check_contract(total_steps > 0 && static_cast<int>(betas.size()) == total_steps &&
                       static_cast<int>(alphas_cumprod.size()) == total_steps,
                   "schedule: inconsistent sizes");
    double prev = 1.0;
    for (int i = 0; i < total_steps; ++i) {
        check_contract(betas[i] > 0.0 && betas[i] < 1.0, "schedule: beta out of (0,1)");
        check_contract(alphas_cumprod[i] < prev, "schedule: alpha_bar not strictly decreasing");
        check_contract(alphas_cumprod[i] > 0.0, "schedule: alpha_bar underflow");
        prev = alphas_cumprod[i];
    }
}

Tensor forward_diffuse(const NoiseSchedule& ns, const Tensor& z0, int t, const Tensor& eps) {
    check_contract(t >= 0 && t < ns.total_steps, "forward_diffuse: t out of range");
    check_contract(z0.same_shape(eps), "forward_diffuse: noise shape mismatch");
    double ab = ns.alpha_bar(t);
    float c0 = static_cast<float>(std::sqrt(ab));
    float c1 = static_cast<float>(std::sqrt(1.0 - ab));
    Tensor out(z0.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = c0 * z0.v[i] + c1 * eps.v[i];
    return out;
}

std::vector<int> ddim_timesteps(int total_steps, int num_steps) {
    check_contract(num_steps >= 2 && num_steps <= total_steps, "ddim: bad step count");
    std::vector<int> ts(num_steps);
    for (int k = 0; k < num_steps; ++k)
        ts[k] = static_cast<int>(
            std::llround(static_cast<double>(num_steps - 1 - k) * (total_steps - 1) /
                         (num_steps - 1)));
    return ts;  // descending, ts.front() == total-1, ts.back() == 0
}

Tensor ddim_update(const NoiseSchedule& ns, const Tensor& z_t, const Tensor& eps_pred, int t,
                   int t_prev) {
    check_contract(t >= 0 && t < ns.total_steps, "ddim: t out of range");
    check_contract(t_prev >= -1 && t_prev < t, "ddim: schedule violation (need t > t_prev)");
    check_contract(z_t.same_shape(eps_pred), "ddim: eps shape mismatch");
    double ab_t = ns.alpha_bar(t);
    double ab_p = ns.alpha_bar(t_prev);
    float inv_sqrt_ab = static_cast<float>(1.0 / std::sqrt(ab_t));
    float sig_t = static_cast<float>(std::sqrt(1.0 - ab_t));
    float c0 = static_cast<float>(std::sqrt(ab_p));
    float c1 = static_cast<float>(std::sqrt(1.0 - ab_p));
    Tensor out(z_t.shape);
    for (int64_t i = 0; i < out.numel(); ++i) {
        float z0_hat = (z_t.v[i] - sig_t * eps_pred.v[i]) * inv_sqrt_ab;
        out.v[i] = c0 * z0_hat + c1 * eps_pred.v[i];
    }
    return out;
}

VarT<float> ldm_loss(const NoiseSchedule& ns, const EpsPredictor& model, const Tensor& z0, int t,
                     const Tensor& eps) {
    Tensor z_t = forward_diffuse(ns, z0, t, eps);
    auto pred = model(leaf(z_t), t);
    return mse_loss(pred, leaf(eps));
}

Tensor ddim_sample(const NoiseSchedule& ns, const EpsFn& model, const Tensor& init_noise,
                   int num_steps) {
    auto ts = ddim_timesteps(ns.total_steps, num_steps);
    Tensor z = init_noise;
    for (size_t k = 0; k < ts.size(); ++k) {
        int t = ts[k];
        int t_prev = (k + 1 < ts.size()) ? ts[k + 1] : -1;
        Tensor eps = model(z, t);
        z = ddim_update(ns, z, eps, t, t_prev);
    }
    return z;
}

}  // namespace egs

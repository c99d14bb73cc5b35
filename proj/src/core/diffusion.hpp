#pragma once

// Diffusion process machinery: the (beta) schedule, the closed-form forward
// noising, and the deterministic DDIM update. The denoiser itself lives in
// unet.hpp; everything here is model-agnostic.

#include <functional>
#include <vector>

#include "core/graph.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace egs {

struct NoiseSchedule {
    int total_steps = 1000;
    std::vector<double> betas;
    std::vector<double> alphas_cumprod;

    // Linear betas 1e-4 -> 2e-2 (DDPM default).
    static NoiseSchedule linear(int steps = 1000, double beta_lo = 1e-4, double beta_hi = 2e-2);

    double alpha_bar(int t) const {
        // t = -1 denotes the clean endpoint of the DDIM chain.
        if (t < 0) return 1.0;
        check_contract(t < total_steps, "schedule: t out of range");
        return alphas_cumprod[static_cast<size_t>(t)];
    }

    void validate() const;
};

// sqrt(abar_t) z0 + sqrt(1 - abar_t) eps. Caller supplies the noise.
Tensor forward_diffuse(const NoiseSchedule& ns, const Tensor& z0, int t, const Tensor& eps);

// Uniformly spaced DDIM timesteps from total-1 down to 0, inclusive.
std::vector<int> ddim_timesteps(int total_steps, int num_steps);

// One deterministic (eta = 0) DDIM update given the model's eps prediction.
Tensor ddim_update(const NoiseSchedule& ns, const Tensor& z_t, const Tensor& eps_pred, int t,
                   int t_prev);

// Epsilon-matching loss ||eps - eps_theta(z_t, t)||^2 (mean over elements).
// The predictor receives the noised latent as a graph variable so gradients
// flow into the model's parameters.
using EpsPredictor = std::function<VarT<float>(const VarT<float>& z_t, int t)>;
VarT<float> ldm_loss(const NoiseSchedule& ns, const EpsPredictor& model, const Tensor& z0, int t,
                     const Tensor& eps);

// Runs the full DDIM chain from the provided initial noise.
using EpsFn = std::function<Tensor(const Tensor& z_t, int t)>;
Tensor ddim_sample(const NoiseSchedule& ns, const EpsFn& model, const Tensor& init_noise,
                   int num_steps);

}  // namespace egs

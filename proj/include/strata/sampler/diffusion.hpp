#pragma once

#include "strata/core/raster.hpp"
#include "strata/sampler/schedule.hpp"

namespace strata::sampler {

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, 1 <= t <= T.
RasterGrid forward_diffuse(const RasterGrid& x0, int t, const RasterGrid& eps, const NoiseSchedule& s);

// x0 estimate implied by (x_t, eps_pred). Throws DomainError when abar_t = 0.
RasterGrid predict_x0(const RasterGrid& x_t, const RasterGrid& eps_pred, int t, const NoiseSchedule& s);

// Stochastic reverse step t -> t-1 with sigma_t from the schedule:
// x_{t-1} = sqrt(abar_{t-1}) x0_hat + sqrt(1 - abar_{t-1} - sigma_t^2) eps_pred + sigma_t z.
// With eta = 1 this equals the DDPM posterior mean plus sigma_t z; at t = 1
// sigma is 0 so noise_draw is ignored.
RasterGrid ddpm_step(const RasterGrid& x_t, const RasterGrid& eps_pred, int t, const NoiseSchedule& s,
                     const RasterGrid& noise_draw);

// Deterministic step t -> t_prev (t_prev <= t; equal returns x_t unchanged).
RasterGrid ddim_step(const RasterGrid& x_t, const RasterGrid& eps_pred, int t, int t_prev,
                     const NoiseSchedule& s);

// In-place variant used by the inner sampling loops; identical arithmetic.
void ddim_step_inplace(std::span<double> x, std::span<const double> eps_pred, int t, int t_prev,
                       const NoiseSchedule& s);

// Mean of squared differences over all elements.
double epsilon_loss(const RasterGrid& eps, const RasterGrid& eps_pred);

} // namespace strata::sampler

#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace strata::sampler {

// Discrete variance schedule. Arrays are indexed by timestep 0..T with
// beta[0] = 0 and alpha_bar[0] = 1, so alpha_bar[1] = 1 - beta[1].
// sigma[t] is the reverse-step noise scale: eta * sqrt(posterior variance)
// with posterior variance (1 - alpha_bar[t-1]) / (1 - alpha_bar[t]) * beta[t].
// eta = 1 reproduces the DDPM mean (x_t - beta_t / sqrt(1 - alpha_bar_t) eps) / sqrt(1 - beta_t);
// eta = 0 collapses the stochastic step onto DDIM.
struct NoiseSchedule {
    std::string kind = "linear";
    int T = 0;
    double beta_start = 0.0;
    double beta_end = 0.0;
    double eta = 1.0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;
    std::vector<double> sigma;
};

inline constexpr int kDefaultT = 50;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 2e-2;
inline constexpr int kDefaultSteps = 40;

// Linear beta from beta_start (t = 1) to beta_end (t = T). Throws DomainError
// unless 0 < beta < 1 throughout and T >= 1.
NoiseSchedule linear_schedule(int T = kDefaultT, double beta_start = kDefaultBetaStart,
                              double beta_end = kDefaultBetaEnd, double eta = 1.0);

// Schedule built from explicit betas (index 1..T); beta list excludes t = 0.
NoiseSchedule schedule_from_betas(const std::vector<double>& betas, double eta = 1.0);

nlohmann::json schedule_to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

// Strictly decreasing timesteps ending with 0. make_step_list spaces `count`
// steps evenly over [T, 0); count is clamped to T.
using StepList = std::vector<int>;
StepList make_step_list(int T, int count);
// Appends the trailing 0 if missing and checks strict decrease within [0, T].
StepList normalize_step_list(const StepList& steps, int T);

} // namespace strata::sampler

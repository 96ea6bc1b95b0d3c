#include "strata/sampler/diffusion.hpp"

#include "strata/core/errors.hpp"

#include <cmath>
#include <string>

namespace strata::sampler {

namespace {

void check_shape(const RasterGrid& a, const RasterGrid& b, const char* op)
{
    if (!a.same_shape(b))
        throw ContractError(std::string(op) + ": shape mismatch");
}

void check_t(int t, const NoiseSchedule& s, const char* op)
{
    if (t < 1 || t > s.T)
        throw DomainError(std::string(op) + ": timestep " + std::to_string(t) + " outside [1, T]");
}

} // namespace

RasterGrid forward_diffuse(const RasterGrid& x0, int t, const RasterGrid& eps, const NoiseSchedule& s)
{
    check_shape(x0, eps, "forward_diffuse");
    check_t(t, s, "forward_diffuse");
    const double a = std::sqrt(s.alpha_bar[t]);
    const double b = std::sqrt(1.0 - s.alpha_bar[t]);
    RasterGrid out = x0;
    auto o = out.data();
    auto e = eps.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = a * o[i] + b * e[i];
    return out;
}

RasterGrid predict_x0(const RasterGrid& x_t, const RasterGrid& eps_pred, int t, const NoiseSchedule& s)
{
    check_shape(x_t, eps_pred, "predict_x0");
    if (t < 0 || t > s.T)
        throw DomainError("predict_x0: timestep outside schedule");
    const double ab = s.alpha_bar[t];
    if (!(ab > 0.0))
        throw DomainError("predict_x0: alpha_bar is zero");
    const double ra = std::sqrt(ab);
    const double rb = std::sqrt(1.0 - ab);
    RasterGrid out = x_t;
    auto o = out.data();
    auto e = eps_pred.data();
    for (std::size_t i = 0; i < o.size(); ++i)
        o[i] = (o[i] - rb * e[i]) / ra;
    return out;
}

RasterGrid ddpm_step(const RasterGrid& x_t, const RasterGrid& eps_pred, int t, const NoiseSchedule& s,
                     const RasterGrid& noise_draw)
{
    check_shape(x_t, eps_pred, "ddpm_step");
    check_shape(x_t, noise_draw, "ddpm_step");
    check_t(t, s, "ddpm_step");
    const double ab = s.alpha_bar[t];
    const double ab_prev = s.alpha_bar[t - 1];
    if (!(ab > 0.0))
        throw DomainError("ddpm_step: alpha_bar is zero");
    const double sigma = t > 1 ? s.sigma[t] : 0.0;
    const double ra = std::sqrt(ab);
    const double rb = std::sqrt(1.0 - ab);
    const double ra_prev = std::sqrt(ab_prev);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
    RasterGrid out = x_t;
    auto o = out.data();
    auto e = eps_pred.data();
    auto z = noise_draw.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double x0 = (o[i] - rb * e[i]) / ra;
        double v = ra_prev * x0 + dir * e[i];
        if (sigma > 0.0)
            v += sigma * z[i];
        o[i] = v;
    }
    return out;
}

void ddim_step_inplace(std::span<double> x, std::span<const double> eps_pred, int t, int t_prev,
                       const NoiseSchedule& s)
{
    if (x.size() != eps_pred.size())
        throw ContractError("ddim_step: shape mismatch");
    if (t_prev > t)
        throw DomainError("ddim_step: t_prev must not exceed t");
    if (t < 0 || t > s.T || t_prev < 0)
        throw DomainError("ddim_step: timestep outside schedule");
    if (t_prev == t)
        return;
    const double ab = s.alpha_bar[t];
    if (!(ab > 0.0))
        throw DomainError("ddim_step: alpha_bar is zero");
    const double ab_prev = s.alpha_bar[t_prev];
    const double ra = std::sqrt(ab);
    const double rb = std::sqrt(1.0 - ab);
    const double ra_prev = std::sqrt(ab_prev);
    const double rb_prev = std::sqrt(1.0 - ab_prev);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = (x[i] - rb * eps_pred[i]) / ra;
        x[i] = ra_prev * x0 + rb_prev * eps_pred[i];
    }
}

RasterGrid ddim_step(const RasterGrid& x_t, const RasterGrid& eps_pred, int t, int t_prev,
                     const NoiseSchedule& s)
{
    check_shape(x_t, eps_pred, "ddim_step");
    RasterGrid out = x_t;
    ddim_step_inplace(out.data(), eps_pred.data(), t, t_prev, s);
    return out;
}

double epsilon_loss(const RasterGrid& eps, const RasterGrid& eps_pred)
{
    check_shape(eps, eps_pred, "epsilon_loss");
    auto a = eps.data();
    auto b = eps_pred.data();
    if (a.empty())
        throw ContractError("epsilon_loss: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

} // namespace strata::sampler

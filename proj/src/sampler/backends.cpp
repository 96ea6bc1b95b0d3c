#include "strata/sampler/backends.hpp"

#include "strata/core/errors.hpp"

#include <algorithm>
#include <cmath>

namespace strata::sampler {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

double alpha_bar_at(const NoiseSchedule& s, int t)
{
    if (t < 1 || t > s.T)
        throw DomainError("backend: timestep outside [1, T]");
    return s.alpha_bar[t];
}

RasterGrid prior_eps(const RasterGrid& x_t, const RasterGrid& mean, double std_dev, double ab)
{
    if (!mean.same_shape(x_t))
        throw ContractError("backend: prior plane shape differs from state");
    RasterGrid out(x_t.width(), x_t.height(), x_t.channels(), x_t.gsd(), x_t.anchor());
    gaussian_prior_eps(x_t.data(), mean.data(), std_dev, ab, out.data());
    return out;
}

} // namespace

void gaussian_prior_eps(std::span<const double> x_t, std::span<const double> mean, double std_dev,
                        double alpha_bar, std::span<double> out)
{
    const double ra = std::sqrt(alpha_bar);
    const double rb = std::sqrt(1.0 - alpha_bar);
    if (std_dev == 0.0) {
        for (std::size_t i = 0; i < x_t.size(); ++i)
            out[i] = (x_t[i] - ra * mean[i]) / rb;
        return;
    }
    const double denom = alpha_bar * std_dev * std_dev + 1.0 - alpha_bar;
    const double k = rb / denom;
    for (std::size_t i = 0; i < x_t.size(); ++i)
        out[i] = k * (x_t[i] - ra * mean[i]);
}

RasterGrid PointMassBackend::predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                                           const ConditionSet& cond) const
{
    return prior_eps(x_t, cond.plane("target"), 0.0, alpha_bar_at(s, t));
}

GaussianPriorBackend::GaussianPriorBackend(double std_dev) : std_(std_dev)
{
    if (!(std_dev >= 0.0))
        throw DomainError("gaussian_prior: std must be non-negative");
}

RasterGrid GaussianPriorBackend::predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                                               const ConditionSet& cond) const
{
    return prior_eps(x_t, cond.plane("prior_mean"), std_, alpha_bar_at(s, t));
}

RasterGrid ConditionEchoBackend::predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                                               const ConditionSet& cond) const
{
    return prior_eps(x_t, cond.plane("lowres_up"), 0.0, alpha_bar_at(s, t));
}

RasterGrid world_value_noise(const RasterGrid& noise, WorldPixel origin, int cell)
{
    const int w = noise.width();
    const int h = noise.height();
    const int C = noise.channels();
    RasterGrid out(w, h, C, noise.gsd(), noise.anchor());
    if (cell < 2 || noise.empty())
        return out;

    std::vector<int> cells;
    std::vector<double> weights;
    double wsum = 0.0;
    double wgt = 1.0;
    for (int c = cell; c >= 2; c /= 2) {
        cells.push_back(c);
        weights.push_back(wgt);
        wsum += wgt;
        wgt *= 0.5;
    }

    struct Tap {
        int i0, i1;
        double f;
    };
    auto taps = [](std::int64_t o, int n, int c) {
        std::vector<Tap> v(n);
        for (int i = 0; i < n; ++i) {
            const std::int64_t g = o + i;
            const std::int64_t lattice = floor_div(g, c) * c;
            const int l0 = static_cast<int>(lattice - o);
            v[i].i0 = std::clamp(l0, 0, n - 1);
            v[i].i1 = std::clamp(l0 + c, 0, n - 1);
            v[i].f = static_cast<double>(g - lattice) / c;
        }
        return v;
    };

    auto dst = out.data();
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto tx = taps(origin.x, w, cells[k]);
        const auto ty = taps(origin.y, h, cells[k]);
        const double wk = weights[k] / wsum;
        for (int y = 0; y < h; ++y) {
            const Tap& ry = ty[y];
            for (int x = 0; x < w; ++x) {
                const Tap& rx = tx[x];
                for (int c = 0; c < C; ++c) {
                    const double a = noise(rx.i0, ry.i0, c);
                    const double b = noise(rx.i1, ry.i0, c);
                    const double d = noise(rx.i0, ry.i1, c);
                    const double e = noise(rx.i1, ry.i1, c);
                    const double top = a + (b - a) * rx.f;
                    const double bot = d + (e - d) * rx.f;
                    dst[out.index(x, y, c)] += wk * (top + (bot - top) * ry.f);
                }
            }
        }
    }
    return out;
}

FractalRefinerBackend::FractalRefinerBackend(FractalRefinerParams p) : p_(p)
{
    if (p.radius < 0)
        throw DomainError("fractal_refiner: radius must be >= 0");
    if (!(p.grain > 0.0))
        throw DomainError("fractal_refiner: grain must be positive");
}

ConditionSet FractalRefinerBackend::prepare(const ConditionSet& cond) const
{
    ConditionSet out = cond;
    const RasterGrid& up = cond.plane("lowres_up");
    RasterGrid mean = up;
    if (p_.radius >= 2 && p_.amplitude != 0.0) {
        const RasterGrid& wn = cond.plane("world_noise");
        if (!wn.same_shape(up))
            throw ContractError("fractal_refiner: world_noise shape differs from lowres_up");
        const RasterGrid detail = world_value_noise(wn, cond.origin, p_.radius);
        auto m = mean.data();
        auto d = detail.data();
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] += p_.amplitude * d[i];
    }
    for (double& v : mean.data())
        v = std::clamp(v, 0.0, 1.0);
    out.planes["prior_mean"] = std::move(mean);
    return out;
}

RasterGrid FractalRefinerBackend::predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                                                const ConditionSet& cond) const
{
    return prior_eps(x_t, cond.plane("prior_mean"), p_.grain, alpha_bar_at(s, t));
}

LatentFractalRefinerBackend::LatentFractalRefinerBackend(FractalRefinerParams p, int codec_factor)
    : pixel_(p), f_(codec_factor), codec_(codec_factor)
{
}

ConditionSet LatentFractalRefinerBackend::prepare(const ConditionSet& cond) const
{
    const RasterGrid& up = cond.plane("lowres_up");
    const int c = up.channels() / (f_ * f_);
    if (c < 1 || c * f_ * f_ != up.channels())
        throw ContractError("latent_fractal_refiner: lowres_up is not a latent of the codec");
    ConditionSet px;
    px.planes["lowres_up"] = codec_.decode(up, c);
    if (cond.has("world_noise"))
        px.planes["world_noise"] = codec_.decode(cond.plane("world_noise"), c);
    px.origin = {cond.origin.x * f_, cond.origin.y * f_};
    ConditionSet out = cond;
    RasterGrid mean = codec_.encode(pixel_.prepare(px).plane("prior_mean"));
    mean.set_georef(up.gsd(), up.anchor());
    out.planes["prior_mean"] = std::move(mean);
    return out;
}

RasterGrid LatentFractalRefinerBackend::predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                                                      const ConditionSet& cond) const
{
    return prior_eps(x_t, cond.plane("prior_mean"), pixel_.params().grain, alpha_bar_at(s, t));
}

void register_sampler_backends(BackendRegistry& registry)
{
    registry.add("point_mass", [](const nlohmann::json&) { return std::make_unique<PointMassBackend>(); });
    registry.add("gaussian_prior", [](const nlohmann::json& j) {
        return std::make_unique<GaussianPriorBackend>(j.value("std", 0.05));
    });
    registry.add("condition_echo",
                 [](const nlohmann::json&) { return std::make_unique<ConditionEchoBackend>(); });
    registry.add("fractal_refiner", [](const nlohmann::json& j) {
        FractalRefinerParams p;
        p.radius = j.value("radius", p.radius);
        p.amplitude = j.value("amplitude", p.amplitude);
        p.grain = j.value("grain", p.grain);
        return std::make_unique<FractalRefinerBackend>(p);
    });
    registry.add("latent_fractal_refiner", [](const nlohmann::json& j) {
        FractalRefinerParams p;
        p.radius = j.value("radius", p.radius);
        p.amplitude = j.value("amplitude", p.amplitude);
        p.grain = j.value("grain", p.grain);
        return std::make_unique<LatentFractalRefinerBackend>(p, j.value("codec_factor", 4));
    });
}

} // namespace strata::sampler

#pragma once

#include "strata/sampler/backend.hpp"
#include "strata/sampler/codec.hpp"

#include <span>

namespace strata::sampler {

// eps_hat for a per-pixel Gaussian prior N(mean, std^2) on x0:
// sqrt(1-abar) (x_t - sqrt(abar) mean) / (abar std^2 + 1 - abar).
// std = 0 is the point-mass optimum (x_t - sqrt(abar) x0*) / sqrt(1-abar).
void gaussian_prior_eps(std::span<const double> x_t, std::span<const double> mean, double std_dev,
                        double alpha_bar, std::span<double> out);

// Point mass at plane "target": DDIM returns the target for any x_T. Radius 0.
class PointMassBackend final : public DenoiserBackend {
public:
    std::string name() const override { return "point_mass"; }
    int receptive_radius() const override { return 0; }
    bool supports(Task t) const override { return t != Task::MultiView; }
    RasterGrid predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                             const ConditionSet& cond) const override;
};

// Independent Gaussian prior per pixel around plane "prior_mean".
class GaussianPriorBackend final : public DenoiserBackend {
public:
    explicit GaussianPriorBackend(double std_dev = 0.05);
    std::string name() const override { return "gaussian_prior"; }
    int receptive_radius() const override { return 0; }
    bool supports(Task t) const override { return t != Task::MultiView; }
    RasterGrid predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                             const ConditionSet& cond) const override;

private:
    double std_;
};

// Point mass at the upsampled condition "lowres_up": refinement reduces to
// the bilinear upsample. Radius 0.
class ConditionEchoBackend final : public DenoiserBackend {
public:
    std::string name() const override { return "condition_echo"; }
    int receptive_radius() const override { return 0; }
    bool supports(Task t) const override { return t == Task::Refine; }
    RasterGrid predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                             const ConditionSet& cond) const override;
};

// Procedural refiner: a narrow Gaussian prior whose mean is the upsampled
// condition plus band-limited detail. Detail is value noise over the
// "world_noise" plane at lattice spacings radius, radius/2, radius/4 anchored
// to world pixel coordinates, so the receptive radius is exactly `radius` and
// overlapping windows see identical detail.
struct FractalRefinerParams {
    int radius = 8;
    double amplitude = 0.04;
    double grain = 0.01;
};

class FractalRefinerBackend final : public DenoiserBackend {
public:
    explicit FractalRefinerBackend(FractalRefinerParams p = {});
    std::string name() const override { return "fractal_refiner"; }
    int receptive_radius() const override { return p_.radius; }
    bool supports(Task t) const override { return t == Task::Refine; }
    // Adds plane "prior_mean".
    ConditionSet prepare(const ConditionSet& cond) const override;
    RasterGrid predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                             const ConditionSet& cond) const override;

    const FractalRefinerParams& params() const noexcept { return p_; }

private:
    FractalRefinerParams p_;
};

// The fractal refiner's prior carried into the latent space of a
// block-local codec: prepare() decodes "lowres_up" and "world_noise", forms
// the pixel-space prior mean at world pixel origin * f and encodes it. The
// codec is orthonormal, so the pixel prior N(mean, grain^2) maps onto
// N(encode(mean), grain^2) per latent value. Latent receptive radius is
// ceil(radius / f).
class LatentFractalRefinerBackend final : public DenoiserBackend {
public:
    explicit LatentFractalRefinerBackend(FractalRefinerParams p = {}, int codec_factor = 4);
    std::string name() const override { return "latent_fractal_refiner"; }
    int receptive_radius() const override { return (pixel_.params().radius + f_ - 1) / f_; }
    bool supports(Task t) const override { return t == Task::Refine; }
    ConditionSet prepare(const ConditionSet& cond) const override;
    RasterGrid predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                             const ConditionSet& cond) const override;

private:
    FractalRefinerBackend pixel_;
    int f_;
    BlockDctCodec codec_;
};

// World-anchored multi-octave value noise over `noise` (same frame as the
// output), lattice spacings cell, cell/2, ... down to 1, weights halving per
// octave and normalized to unit sum. Lattice samples are clamped into the
// frame. Shared by the procedural backends.
RasterGrid world_value_noise(const RasterGrid& noise, WorldPixel origin, int cell);

class BackendRegistry;
// point_mass, gaussian_prior, condition_echo, fractal_refiner,
// latent_fractal_refiner.
void register_sampler_backends(BackendRegistry& registry);

} // namespace strata::sampler

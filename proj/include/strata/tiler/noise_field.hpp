#pragma once

#include "strata/core/geometry.hpp"
#include "strata/core/raster.hpp"

#include <cstdint>

namespace strata::tiler {

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Inverse standard normal CDF (Wichura AS241, ~1e-16 relative). p in (0,1).
double normal_quantile(double p) noexcept;

// Counter-based Gaussian field addressed by (level, timestep, world pixel,
// channel). No state is carried between draws, so any window schedule sees
// the same value at the same address. Timestep slot 0 carries detail noise;
// initial noise x_T uses slot T.
class NoiseField {
public:
    explicit NoiseField(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    double draw(int level, int timestep, std::int64_t x, std::int64_t y, int channel) const noexcept;

    // Draws over the w x h block whose pixel (0,0) sits at world pixel origin;
    // the raster carries gsd/anchor for bookkeeping only.
    RasterGrid block(int level, int timestep, WorldPixel origin, int w, int h, int channels,
                     double gsd = 1.0, Vec2 anchor = {}) const;

    // Statistically independent field for an alternate stream.
    NoiseField derive(std::uint64_t stream) const noexcept;

private:
    std::uint64_t seed_;
};

} // namespace strata::tiler

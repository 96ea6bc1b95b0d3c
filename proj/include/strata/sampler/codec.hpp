#pragma once

#include "strata/core/raster.hpp"

#include <memory>
#include <string>
#include <vector>

namespace strata::sampler {

// Image <-> latent transform. A block-local codec maps each f x f pixel block
// to exactly one latent pixel, so latent (u,v) covers pixels
// [f*u, f*u+f) x [f*v, f*v+f). Latent rasters keep the anchor and scale gsd by f.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual std::string name() const = 0;
    virtual int factor() const = 0;
    virtual bool block_local() const = 0;
    virtual int latent_channels(int image_channels) const = 0;
    virtual RasterGrid encode(const RasterGrid& image) const = 0;
    virtual RasterGrid decode(const RasterGrid& latent, int image_channels) const = 0;
};

// Orthonormal 2D DCT-II per f x f block and per channel. Latent channel
// k * C + c holds coefficient k (row-major over (v,u), k = 0 is DC) of image
// channel c, so the first C channels are the block DCs (f times the block
// mean). Exactly invertible up to rounding. f = 1 is the identity.
class BlockDctCodec final : public LatentCodec {
public:
    explicit BlockDctCodec(int factor = 4);
    std::string name() const override { return "block_dct"; }
    int factor() const override { return f_; }
    bool block_local() const override { return true; }
    int latent_channels(int image_channels) const override { return image_channels * f_ * f_; }
    RasterGrid encode(const RasterGrid& image) const override;
    RasterGrid decode(const RasterGrid& latent, int image_channels) const override;

private:
    int f_;
    std::vector<double> basis_; // basis_[u * f + x] = a_u cos(pi (2x+1) u / 2f)
};

// "block_dct" (factor f) or "identity" (f = 1). Throws RegistryError otherwise.
std::unique_ptr<LatentCodec> make_codec(const std::string& name, int factor = 4);

} // namespace strata::sampler

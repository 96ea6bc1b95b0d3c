#pragma once

#include "strata/core/geometry.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace strata {

// Row-major multi-channel raster with a ground sample distance and a world
// anchor. The anchor is the world coordinate (x east, y north, meters) of the
// top-left corner of pixel (0,0); pixel (i,j) covers
// [anchor.x + i*gsd, anchor.x + (i+1)*gsd] x [anchor.y - (j+1)*gsd, anchor.y - j*gsd].
// Imagery holds values normalized to [0,1]; heights hold meters.
class RasterGrid {
public:
    RasterGrid() = default;
    RasterGrid(int width, int height, int channels, double gsd = 1.0, Vec2 anchor = {},
               double fill = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    double gsd() const noexcept { return gsd_; }
    Vec2 anchor() const noexcept { return anchor_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t size() const noexcept { return data_.size(); }

    void set_georef(double gsd, Vec2 anchor);

    std::size_t index(int x, int y, int c = 0) const noexcept
    {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }
    double operator()(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }
    double& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    // World extent in meters: (width * gsd, height * gsd).
    Vec2 extent_m() const noexcept { return {width_ * gsd_, height_ * gsd_}; }
    Vec2 pixel_center(double x, double y) const noexcept
    {
        return {anchor_.x + (x + 0.5) * gsd_, anchor_.y - (y + 0.5) * gsd_};
    }

    bool same_shape(const RasterGrid& other) const noexcept
    {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    // Sub-raster; the anchor follows the cropped corner. Out-of-range
    // requests throw ContractError.
    RasterGrid crop(int x0, int y0, int w, int h) const;
    // Single channel (or channel range) copy.
    RasterGrid channel_slice(int first, int count) const;

    bool operator==(const RasterGrid&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    double gsd_ = 1.0;
    Vec2 anchor_{};
    std::vector<double> data_;
};

// Integer world-lattice coordinate of pixel (0,0) at this raster's gsd.
WorldPixel world_pixel_origin(const RasterGrid& raster) noexcept;

// Bilinear blend of the four texels around (x, y) in pixel-center
// coordinates (texel i sits at x = i). Requires 0 <= x <= width-1 and
// 0 <= y <= height-1, otherwise throws SamplingError.
void bilinear_sample(const RasterGrid& raster, double x, double y, std::span<double> out);
std::vector<double> bilinear_sample(const RasterGrid& raster, double x, double y);

// Same blend with coordinates clamped into the valid range first.
void bilinear_sample_clamped(const RasterGrid& raster, double x, double y, std::span<double> out);

// Stack rasters of equal width/height channel-wise (georef from the first).
RasterGrid concat_channels(std::span<const RasterGrid> parts);

} // namespace strata

#include "strata/core/raster.hpp"

#include "strata/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace strata {

RasterGrid::RasterGrid(int width, int height, int channels, double gsd, Vec2 anchor, double fill)
    : width_(width), height_(height), channels_(channels), gsd_(gsd), anchor_(anchor)
{
    if (width < 0 || height < 0 || channels <= 0)
        throw ContractError("RasterGrid: invalid shape " + std::to_string(width) + "x" +
                            std::to_string(height) + "x" + std::to_string(channels));
    if (!(gsd > 0.0))
        throw DomainError("RasterGrid: gsd must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

void RasterGrid::set_georef(double gsd, Vec2 anchor)
{
    if (!(gsd > 0.0))
        throw DomainError("RasterGrid: gsd must be positive");
    gsd_ = gsd;
    anchor_ = anchor;
}

RasterGrid RasterGrid::crop(int x0, int y0, int w, int h) const
{
    if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > width_ || y0 + h > height_)
        throw ContractError("RasterGrid::crop: window outside raster");
    RasterGrid out(w, h, channels_, gsd_, {anchor_.x + x0 * gsd_, anchor_.y - y0 * gsd_});
    const std::size_t row = static_cast<std::size_t>(w) * channels_;
    for (int y = 0; y < h; ++y) {
        const double* src = data_.data() + index(x0, y0 + y);
        std::copy(src, src + row, out.data_.data() + y * row);
    }
    return out;
}

RasterGrid RasterGrid::channel_slice(int first, int count) const
{
    if (first < 0 || count <= 0 || first + count > channels_)
        throw ContractError("RasterGrid::channel_slice: channel range outside raster");
    RasterGrid out(width_, height_, count, gsd_, anchor_);
    const std::size_t n = static_cast<std::size_t>(width_) * height_;
    for (std::size_t p = 0; p < n; ++p)
        for (int c = 0; c < count; ++c)
            out.data_[p * count + c] = data_[p * channels_ + first + c];
    return out;
}

WorldPixel world_pixel_origin(const RasterGrid& raster) noexcept
{
    const Vec2 a = raster.anchor();
    return {std::llround(a.x / raster.gsd()), std::llround(-a.y / raster.gsd())};
}

namespace {

void blend(const RasterGrid& r, double x, double y, std::span<double> out)
{
    const int w = r.width();
    const int h = r.height();
    // Floor keeps integer coordinates on fx = fy = 0, so stored texels come
    // back bit-exact.
    const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, w - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    for (int c = 0; c < r.channels(); ++c) {
        const double top = r(x0, y0, c) + (r(x1, y0, c) - r(x0, y0, c)) * fx;
        const double bot = r(x0, y1, c) + (r(x1, y1, c) - r(x0, y1, c)) * fx;
        out[c] = top + (bot - top) * fy;
    }
}

} // namespace

void bilinear_sample(const RasterGrid& raster, double x, double y, std::span<double> out)
{
    if (raster.empty())
        throw SamplingError("bilinear_sample: empty raster");
    if (!(x >= 0.0 && y >= 0.0 && x <= raster.width() - 1 && y <= raster.height() - 1))
        throw SamplingError("bilinear_sample: coordinate outside raster");
    if (out.size() < static_cast<std::size_t>(raster.channels()))
        throw ContractError("bilinear_sample: output span too small");
    blend(raster, x, y, out);
}

std::vector<double> bilinear_sample(const RasterGrid& raster, double x, double y)
{
    std::vector<double> out(raster.channels());
    bilinear_sample(raster, x, y, out);
    return out;
}

void bilinear_sample_clamped(const RasterGrid& raster, double x, double y, std::span<double> out)
{
    if (raster.empty())
        throw SamplingError("bilinear_sample: empty raster");
    x = std::clamp(x, 0.0, static_cast<double>(raster.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(raster.height() - 1));
    if (std::isnan(x) || std::isnan(y))
        throw SamplingError("bilinear_sample: NaN coordinate");
    blend(raster, x, y, out);
}

RasterGrid concat_channels(std::span<const RasterGrid> parts)
{
    if (parts.empty())
        throw ContractError("concat_channels: no inputs");
    const int w = parts[0].width();
    const int h = parts[0].height();
    int total = 0;
    for (const auto& p : parts) {
        if (p.width() != w || p.height() != h)
            throw ContractError("concat_channels: size mismatch");
        total += p.channels();
    }
    RasterGrid out(w, h, total, parts[0].gsd(), parts[0].anchor());
    auto dst = out.data();
    const std::size_t n = static_cast<std::size_t>(w) * h;
    int offset = 0;
    for (const auto& p : parts) {
        const int c = p.channels();
        auto src = p.data();
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < c; ++k)
                dst[i * total + offset + k] = src[i * c + k];
        offset += c;
    }
    return out;
}

} // namespace strata

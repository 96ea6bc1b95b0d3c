#pragma once

#include "strata/core/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace strata::io {

// Interleaved 8- or 16-bit samples; channels in {1, 2, 3, 4}.
struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> samples;
};

std::vector<std::uint8_t> encode_png(const PngImage& img, int zlib_level = 6);
PngImage decode_png(std::span<const std::uint8_t> bytes);

void write_png(const std::filesystem::path& path, const PngImage& img, int zlib_level = 6);
PngImage read_png(const std::filesystem::path& path);

// Linear map of [value_min, value_max] onto the integer range of bit_depth,
// round half up, clamped.
struct Quantization {
    int bit_depth = 8;
    double value_min = 0.0;
    double value_max = 1.0;
};

PngImage quantize_raster(const RasterGrid& raster, const Quantization& q);
RasterGrid dequantize_raster(const PngImage& img, const Quantization& q, double gsd, Vec2 anchor);

// PNG plus a JSON sidecar at <path>.json holding
// {gsd, anchor_x, anchor_y, channels, bit_depth, value_min, value_max, height_scale}.
void write_raster(const std::filesystem::path& path, const RasterGrid& raster,
                  const Quantization& q, int zlib_level = 6);
RasterGrid read_raster(const std::filesystem::path& path);

} // namespace strata::io

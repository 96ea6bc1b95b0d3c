#include "strata/io/png.hpp"

#include "strata/core/errors.hpp"
#include "strata/io/files.hpp"

#include <json.hpp>
#include <png.h>

#include <cmath>
#include <cstring>

namespace strata::io {

namespace {

int color_type_for(int channels)
{
    switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGBA;
    default: throw IoError("png: unsupported channel count " + std::to_string(channels));
    }
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

struct ReadCursor {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

void read_cb(png_structp png, png_bytep out, png_size_t n)
{
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + n > cur->bytes.size())
        throw IoError("png: truncated stream");
    std::memcpy(out, cur->bytes.data() + cur->pos, n);
    cur->pos += n;
}

void write_cb(png_structp png, png_bytep data, png_size_t n)
{
    auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    buf->insert(buf->end(), data, data + n);
}

void flush_cb(png_structp) {}

} // namespace

std::vector<std::uint8_t> encode_png(const PngImage& img, int zlib_level)
{
    if (img.bit_depth != 8 && img.bit_depth != 16)
        throw IoError("png: bit depth must be 8 or 16");
    const int ct = color_type_for(img.channels);
    if (img.samples.size() != static_cast<std::size_t>(img.width) * img.height * img.channels)
        throw IoError("png: sample count mismatch");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png)
        throw IoError("png: cannot allocate writer");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> out;
    try {
        png_set_write_fn(png, &out, write_cb, flush_cb);
        png_set_compression_level(png, zlib_level);
        png_set_IHDR(png, info, img.width, img.height, img.bit_depth, ct, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t row_samples = static_cast<std::size_t>(img.width) * img.channels;
        const std::size_t bps = img.bit_depth / 8;
        std::vector<std::uint8_t> row(row_samples * bps);
        for (int y = 0; y < img.height; ++y) {
            const std::uint16_t* src = img.samples.data() + y * row_samples;
            if (bps == 1) {
                for (std::size_t i = 0; i < row_samples; ++i)
                    row[i] = static_cast<std::uint8_t>(src[i]);
            } else {
                for (std::size_t i = 0; i < row_samples; ++i) {
                    row[2 * i] = static_cast<std::uint8_t>(src[i] >> 8);
                    row[2 * i + 1] = static_cast<std::uint8_t>(src[i] & 0xff);
                }
            }
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

PngImage decode_png(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw IoError("png: bad signature");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png)
        throw IoError("png: cannot allocate reader");
    png_infop info = png_create_info_struct(png);
    ReadCursor cursor{bytes, 0};
    PngImage img;
    try {
        png_set_read_fn(png, &cursor, read_cb);
        png_read_info(png, info);
        const int ct = png_get_color_type(png, info);
        int depth = png_get_bit_depth(png, info);
        if (ct == PNG_COLOR_TYPE_PALETTE)
            png_set_palette_to_rgb(png);
        if (ct == PNG_COLOR_TYPE_GRAY && depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
            depth = 8;
        }
        png_read_update_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = png_get_channels(png, info);
        img.bit_depth = png_get_bit_depth(png, info);
        const std::size_t rowbytes = png_get_rowbytes(png, info);
        std::vector<std::uint8_t> row(rowbytes);
        const std::size_t row_samples = static_cast<std::size_t>(img.width) * img.channels;
        img.samples.resize(row_samples * img.height);
        for (int y = 0; y < img.height; ++y) {
            png_read_row(png, row.data(), nullptr);
            std::uint16_t* dst = img.samples.data() + y * row_samples;
            if (img.bit_depth == 16) {
                for (std::size_t i = 0; i < row_samples; ++i)
                    dst[i] = static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
            } else {
                for (std::size_t i = 0; i < row_samples; ++i)
                    dst[i] = row[i];
            }
        }
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::filesystem::path& path, const PngImage& img, int zlib_level)
{
    write_bytes(path, encode_png(img, zlib_level));
}

PngImage read_png(const std::filesystem::path& path) { return decode_png(read_bytes(path)); }

PngImage quantize_raster(const RasterGrid& raster, const Quantization& q)
{
    if (!(q.value_max > q.value_min))
        throw QuantizationError("quantize: degenerate value range");
    if (q.bit_depth != 8 && q.bit_depth != 16)
        throw QuantizationError("quantize: bit depth must be 8 or 16");
    const double top = q.bit_depth == 8 ? 255.0 : 65535.0;
    const double scale = top / (q.value_max - q.value_min);
    PngImage img{raster.width(), raster.height(), raster.channels(), q.bit_depth, {}};
    img.samples.resize(raster.size());
    auto src = raster.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        double v = std::floor((src[i] - q.value_min) * scale + 0.5);
        if (!(v > 0.0))
            v = 0.0;
        if (v > top)
            v = top;
        img.samples[i] = static_cast<std::uint16_t>(v);
    }
    return img;
}

RasterGrid dequantize_raster(const PngImage& img, const Quantization& q, double gsd, Vec2 anchor)
{
    if (!(q.value_max > q.value_min))
        throw QuantizationError("dequantize: degenerate value range");
    const double top = img.bit_depth == 8 ? 255.0 : 65535.0;
    RasterGrid out(img.width, img.height, img.channels, gsd, anchor);
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] = q.value_min + (img.samples[i] / top) * (q.value_max - q.value_min);
    return out;
}

void write_raster(const std::filesystem::path& path, const RasterGrid& raster, const Quantization& q,
                  int zlib_level)
{
    write_png(path, quantize_raster(raster, q), zlib_level);
    const double top = q.bit_depth == 8 ? 255.0 : 65535.0;
    nlohmann::ordered_json meta;
    meta["gsd"] = raster.gsd();
    meta["anchor_x"] = raster.anchor().x;
    meta["anchor_y"] = raster.anchor().y;
    meta["channels"] = raster.channels();
    meta["bit_depth"] = q.bit_depth;
    meta["value_min"] = q.value_min;
    meta["value_max"] = q.value_max;
    meta["height_scale"] = (q.value_max - q.value_min) / top;
    std::filesystem::path side = path;
    side += ".json";
    write_text(side, meta.dump(2) + "\n");
}

RasterGrid read_raster(const std::filesystem::path& path)
{
    std::filesystem::path side = path;
    side += ".json";
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text(side));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("raster sidecar " + side.string() + ": " + e.what());
    }
    const PngImage img = read_png(path);
    Quantization q{meta.value("bit_depth", img.bit_depth), meta.value("value_min", 0.0),
                   meta.value("value_max", 1.0)};
    if (img.bit_depth != q.bit_depth || img.channels != meta.value("channels", img.channels))
        throw IoError("raster sidecar disagrees with " + path.string());
    return dequantize_raster(img, q, meta.at("gsd").get<double>(),
                             {meta.at("anchor_x").get<double>(), meta.at("anchor_y").get<double>()});
}

} // namespace strata::io

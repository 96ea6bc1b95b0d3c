#include "strata/lift/height.hpp"

#include "strata/core/embedding.hpp"
#include "strata/core/errors.hpp"
#include "strata/io/files.hpp"
#include "strata/io/png.hpp"
#include "strata/sampler/backends.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace strata::lift {

HeightMap HeightMap::from_meters(RasterGrid meters)
{
    if (meters.channels() != 1)
        throw DomainError("height map must have one channel");
    double hi = 0.0;
    for (double& v : meters.data()) {
        if (std::isnan(v))
            throw DomainError("height map contains NaN");
        v = std::max(v, 0.0);
        hi = std::max(hi, v);
    }
    HeightMap h;
    h.raster = std::move(meters);
    // Dynamic range; a flat map still gets a usable range.
    h.valid_range = {0.0, std::max(hi, 1.0)};
    return h;
}

namespace {

void check_range(HeightRange r)
{
    if (!(r.max_m > r.min_m) || !std::isfinite(r.max_m) || !std::isfinite(r.min_m))
        throw QuantizationError("height range must satisfy max > min");
}

} // namespace

ByteRaster quantize_height(const RasterGrid& h, HeightRange range)
{
    check_range(range);
    if (h.channels() != 1)
        throw QuantizationError("quantize_height expects one channel");
    ByteRaster q{h.width(), h.height(), std::vector<std::uint8_t>(h.size())};
    const double span = range.max_m - range.min_m;
    auto src = h.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = std::clamp(std::max(src[i], 0.0), range.min_m, range.max_m);
        const double k = std::floor((v - range.min_m) / span * 255.0 + 0.5);
        q.data[i] = static_cast<std::uint8_t>(std::clamp(k, 0.0, 255.0));
    }
    return q;
}

RasterGrid dequantize_height(const ByteRaster& q, HeightRange range, double gsd, Vec2 anchor)
{
    check_range(range);
    RasterGrid out(q.width, q.height, 1, gsd, anchor);
    const double span = range.max_m - range.min_m;
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] = range.min_m + q.data[i] / 255.0 * span;
    return out;
}

void write_height(const std::filesystem::path& path, const HeightMap& h)
{
    const ByteRaster q = quantize_height(h.raster, h.valid_range);
    io::PngImage img{q.width, q.height, 1, 8, std::vector<std::uint16_t>(q.data.begin(), q.data.end())};
    io::write_png(path, img);
    nlohmann::ordered_json j;
    j["min_m"] = h.valid_range.min_m;
    j["max_m"] = h.valid_range.max_m;
    j["gsd"] = h.raster.gsd();
    j["anchor_x"] = h.raster.anchor().x;
    j["anchor_y"] = h.raster.anchor().y;
    io::write_text(path.string() + ".json", j.dump(2) + "\n");
}

HeightMap read_height(const std::filesystem::path& path)
{
    const io::PngImage img = io::read_png(path);
    if (img.channels != 1 || img.bit_depth != 8)
        throw IoError("height file must be 8-bit single channel: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path.string() + ".json"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad height sidecar for " + path.string() + ": " + e.what());
    }
    ByteRaster q{img.width, img.height, std::vector<std::uint8_t>(img.samples.begin(), img.samples.end())};
    HeightMap h;
    h.valid_range = {j.at("min_m").get<double>(), j.at("max_m").get<double>()};
    h.raster = dequantize_height(q, h.valid_range, j.at("gsd").get<double>(),
                                 {j.value("anchor_x", 0.0), j.value("anchor_y", 0.0)});
    return h;
}

namespace {

double smoothstep(double e0, double e1, double x)
{
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Box mean over a (2r+1)^2 neighbourhood, clamped to the frame.
RasterGrid box_blur(const RasterGrid& src, int r)
{
    const int w = src.width(), h = src.height();
    RasterGrid tmp(w, h, 1), out(w, h, 1, src.gsd(), src.anchor());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d)
                s += src(std::clamp(x + d, 0, w - 1), y);
            tmp(x, y) = s / (2 * r + 1);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int d = -r; d <= r; ++d)
                s += tmp(x, std::clamp(y + d, 0, h - 1));
            out(x, y) = s / (2 * r + 1);
        }
    return out;
}

constexpr int kBlurRadius = 2;
constexpr int kDetailCell = 8;

} // namespace

ProceduralHeightBackend::ProceduralHeightBackend(ProceduralHeightParams p) : p_(p), codec_(p.codec_factor)
{
    if (!(p.envelope_m > 0.0))
        throw DomainError("procedural_height: envelope must be positive");
    if (!(p.roof_hi > p.roof_lo))
        throw DomainError("procedural_height: roof_hi must exceed roof_lo");
    if (!(p.grain > 0.0))
        throw DomainError("procedural_height: grain must be positive");
}

RasterGrid ProceduralHeightBackend::target(const RasterGrid& ortho_px, const RasterGrid& noise_px,
                                           WorldPixel origin_px) const
{
    if (ortho_px.channels() != 3)
        throw ContractError("procedural_height: ortho must be RGB");
    const int w = ortho_px.width(), h = ortho_px.height();
    RasterGrid lum(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            lum(x, y) = 0.299 * ortho_px(x, y, 0) + 0.587 * ortho_px(x, y, 1) + 0.114 * ortho_px(x, y, 2);
    const RasterGrid lb = box_blur(lum, kBlurRadius);
    const RasterGrid detail = sampler::world_value_noise(noise_px.channel_slice(0, 1), origin_px, kDetailCell);

    RasterGrid out(w, h, 1, ortho_px.gsd(), ortho_px.anchor());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double d = detail(x, y);
            const double ground = std::max(0.0, p_.ground_m + p_.relief_m * d);
            const double roof = smoothstep(p_.roof_lo, p_.roof_hi, lb(x, y) + 0.05 * d);
            const double tall = p_.building_m * std::max(0.2, 1.0 + 0.8 * d);
            out(x, y) = std::clamp((ground + roof * tall) / p_.envelope_m, 0.0, 1.0);
        }
    return out;
}

sampler::ConditionSet ProceduralHeightBackend::prepare(const sampler::ConditionSet& cond) const
{
    if (!cond.prompt || cond.prompt->empty())
        throw ContractError("procedural_height: a height prompt is required");
    const int f = codec_.factor();
    const RasterGrid ortho = codec_.decode(cond.plane("ortho"), 3);
    const RasterGrid noise = codec_.decode(cond.plane("world_noise"), 1);
    const WorldPixel origin_px{cond.origin.x * f, cond.origin.y * f};
    sampler::ConditionSet out = cond;
    RasterGrid mean = codec_.encode(target(ortho, noise, origin_px));
    mean.set_georef(cond.plane("ortho").gsd(), cond.plane("ortho").anchor());
    out.planes["prior_mean"] = std::move(mean);
    return out;
}

RasterGrid ProceduralHeightBackend::predict_noise(const RasterGrid& x_t, int t, const sampler::NoiseSchedule& s,
                                                  const sampler::ConditionSet& cond) const
{
    if (t < 1 || t > s.T)
        throw DomainError("procedural_height: timestep outside [1, T]");
    const RasterGrid& mean = cond.plane("prior_mean");
    if (!mean.same_shape(x_t))
        throw ContractError("procedural_height: state shape differs from prior");
    RasterGrid out(x_t.width(), x_t.height(), x_t.channels(), x_t.gsd(), x_t.anchor());
    sampler::gaussian_prior_eps(x_t.data(), mean.data(), p_.grain, s.alpha_bar[t], out.data());
    return out;
}

HeightMap infer_height(const RasterGrid& ortho, const sampler::DenoiserBackend& backend,
                       const sampler::LatentCodec& codec, const HeightPrompt& prompt,
                       const tiler::NoiseField& field, const HeightOptions& options)
{
    sampler::require_task(backend, sampler::Task::Height);
    if (ortho.channels() != 3)
        throw ContractError("infer_height: ortho must be RGB");
    if (prompt.text.empty())
        throw ContractError("infer_height: empty prompt");
    sampler::ConditionSet cond;
    cond.planes.emplace("ortho", ortho);
    cond.prompt = prompt.text;
    cond.origin = world_pixel_origin(ortho);
    cond.target_gsd = ortho.gsd();
    cond.resolution_embedding = resolution_embedding(ortho.gsd(), 16);
    tiler::TileOptions tile = options.tile;
    tile.channels = 1;
    tile.level = kHeightLevel;
    RasterGrid h = tiler::generate_unbounded_latent(cond, codec, backend, field, options.steps, options.schedule,
                                                    tile);
    for (double& v : h.data())
        v *= options.envelope_m;
    h.set_georef(ortho.gsd(), ortho.anchor());
    return HeightMap::from_meters(std::move(h));
}

void register_lift_backends(sampler::BackendRegistry& registry)
{
    registry.add("procedural_height", [](const nlohmann::json& j) {
        ProceduralHeightParams p;
        p.codec_factor = j.value("codec_factor", p.codec_factor);
        p.envelope_m = j.value("envelope_m", p.envelope_m);
        p.ground_m = j.value("ground_m", p.ground_m);
        p.relief_m = j.value("relief_m", p.relief_m);
        p.building_m = j.value("building_m", p.building_m);
        p.grain = j.value("grain", p.grain);
        return std::make_unique<ProceduralHeightBackend>(p);
    });
}

} // namespace strata::lift

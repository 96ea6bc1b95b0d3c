#include "strata/cascade/cascade.hpp"

#include "strata/core/embedding.hpp"
#include "strata/core/errors.hpp"

#include <algorithm>
#include <cmath>

namespace strata::cascade {

void ScaleLadder::validate() const
{
    if (levels.empty())
        throw LadderError("ladder needs at least one level");
    if (factor < 2)
        throw LadderError("ladder factor must be >= 2");
    if (patch <= 0)
        throw LadderError("ladder patch must be positive");
    for (double g : levels)
        if (!(g > 0.0))
            throw LadderError("ladder gsd values must be positive");
    for (std::size_t i = 1; i < levels.size(); ++i)
        check_ratio(levels[i - 1], levels[i], factor);
}

ScaleLadder ladder_from_json(const nlohmann::json& j)
{
    ScaleLadder l;
    try {
        if (j.contains("levels"))
            l.levels = j.at("levels").get<std::vector<double>>();
        l.factor = j.value("factor", l.factor);
        l.patch = j.value("patch", l.patch);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("ladder: ") + e.what());
    }
    l.validate();
    return l;
}

nlohmann::json ladder_to_json(const ScaleLadder& l)
{
    return {{"levels", l.levels}, {"factor", l.factor}, {"patch", l.patch}};
}

void check_ratio(double low_gsd, double target_gsd, int factor)
{
    if (!(target_gsd > 0.0) || std::fabs(low_gsd / target_gsd - factor) > 1e-9 * factor)
        throw LadderError("gsd ratio " + std::to_string(low_gsd) + "/" + std::to_string(target_gsd) +
                          " does not equal the ladder factor " + std::to_string(factor));
}

namespace {

struct Tap {
    int i0, i1;
    double f;
};

std::vector<Tap> taps(int start, int count, int factor, int src)
{
    std::vector<Tap> v(count);
    for (int k = 0; k < count; ++k) {
        const int X = start + k;
        double u = (X + 0.5) / factor - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(src - 1));
        const int i0 = static_cast<int>(std::floor(u));
        v[k] = {i0, std::min(i0 + 1, src - 1), u - i0};
    }
    return v;
}

} // namespace

RasterGrid upsample_region(const RasterGrid& low, int factor, int x0, int y0, int w, int h)
{
    if (low.empty())
        throw ContractError("upsample: empty raster");
    if (factor < 1)
        throw ContractError("upsample: factor must be >= 1");
    const double gsd = low.gsd() / factor;
    const Vec2 a = low.anchor();
    RasterGrid out(w, h, low.channels(), gsd, {a.x + x0 * gsd, a.y - y0 * gsd});
    const auto tx = taps(x0, w, factor, low.width());
    const auto ty = taps(y0, h, factor, low.height());
    const int C = low.channels();
    for (int y = 0; y < h; ++y) {
        const Tap& ry = ty[y];
        for (int x = 0; x < w; ++x) {
            const Tap& rx = tx[x];
            for (int c = 0; c < C; ++c) {
                const double p = low(rx.i0, ry.i0, c);
                const double q = low(rx.i1, ry.i0, c);
                const double r = low(rx.i0, ry.i1, c);
                const double s = low(rx.i1, ry.i1, c);
                const double top = p + (q - p) * rx.f;
                const double bot = r + (s - r) * rx.f;
                out(x, y, c) = top + (bot - top) * ry.f;
            }
        }
    }
    return out;
}

RasterGrid upsample(const RasterGrid& low, int factor)
{
    return upsample_region(low, factor, 0, 0, low.width() * factor, low.height() * factor);
}

sampler::ConditionSet assemble_condition_region(const RasterGrid& low, double target_gsd, int factor, int x0,
                                                int y0, int w, int h, int embed_dim)
{
    check_ratio(low.gsd(), target_gsd, factor);
    sampler::ConditionSet c;
    RasterGrid up = upsample_region(low, factor, x0, y0, w, h);
    // Keep the requested gsd exactly rather than low.gsd / factor.
    up.set_georef(target_gsd, up.anchor());
    c.origin = world_pixel_origin(up);
    c.planes.emplace("lowres_up", std::move(up));
    c.resolution_embedding = resolution_embedding(target_gsd, embed_dim);
    c.target_gsd = target_gsd;
    return c;
}

sampler::ConditionSet assemble_condition(const RasterGrid& low, double target_gsd, int factor, int embed_dim)
{
    return assemble_condition_region(low, target_gsd, factor, 0, 0, low.width() * factor,
                                     low.height() * factor, embed_dim);
}

RasterGrid quantize_unit_8bit(const RasterGrid& r)
{
    RasterGrid out = r;
    for (double& v : out.data())
        v = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5) / 255.0;
    return out;
}

namespace {

RasterGrid refine_level(const RasterGrid& x_i, double target_gsd, int factor,
                        const sampler::DenoiserBackend& backend, const tiler::NoiseField& field, int level,
                        const CascadeOptions& opt, bool materialize, const TileObserver& observer)
{
    check_ratio(x_i.gsd(), target_gsd, factor);
    tiler::TileOptions tile = opt.tile;
    tile.level = level;
    tile.channels = x_i.channels();
    const int W = x_i.width() * factor;
    const int H = x_i.height() * factor;
    const std::int64_t px = static_cast<std::int64_t>(W) * H;

    if (px <= opt.stream_threshold_px) {
        RasterGrid out = tiler::generate_unbounded(assemble_condition(x_i, target_gsd, factor), backend, field,
                                                   opt.steps, opt.schedule, tile);
        if (observer)
            observer(level, 0, 0, out);
        return out;
    }

    RasterGrid out;
    if (materialize) {
        RasterGrid probe = upsample_region(x_i, factor, 0, 0, 1, 1);
        out = RasterGrid(W, H, x_i.channels(), target_gsd, probe.anchor());
    }
    auto provider = [&](int x0, int y0, int w, int h) {
        return assemble_condition_region(x_i, target_gsd, factor, x0, y0, w, h);
    };
    auto sink = [&](int x0, int y0, const RasterGrid& t) {
        if (materialize)
            for (int y = 0; y < t.height(); ++y)
                for (int x = 0; x < t.width(); ++x)
                    for (int c = 0; c < t.channels(); ++c)
                        out(x0 + x, y0 + y, c) = t(x, y, c);
        if (observer)
            observer(level, x0, y0, t);
    };
    tiler::generate_streamed(W, H, provider, nullptr, backend, field, opt.steps, opt.schedule, tile, opt.stream,
                             sink);
    return out;
}

} // namespace

RasterGrid refine_once(const RasterGrid& x_i, double target_gsd, int factor, const sampler::DenoiserBackend& backend,
                       const tiler::NoiseField& field, int level, const CascadeOptions& options)
{
    return refine_level(x_i, target_gsd, factor, backend, field, level, options, true, {});
}

std::vector<RasterGrid> run_cascade(const RasterGrid& anchor, const ScaleLadder& ladder,
                                    const sampler::DenoiserBackend& backend, std::uint64_t seed,
                                    const CascadeOptions& options, const TileObserver& observer)
{
    ladder.validate();
    sampler::require_task(backend, sampler::Task::Refine);
    if (std::fabs(anchor.gsd() / ladder.levels.front() - 1.0) > 1e-9)
        throw LadderError("anchor gsd does not match the coarsest ladder level");
    const tiler::NoiseField field(seed);
    std::vector<RasterGrid> levels(ladder.levels.size());
    levels[0] = options.quantize_levels ? quantize_unit_8bit(anchor) : anchor;
    for (std::size_t i = 1; i < ladder.levels.size(); ++i) {
        const std::int64_t px = static_cast<std::int64_t>(levels[i - 1].width()) * ladder.factor *
                                levels[i - 1].height() * ladder.factor;
        const bool materialize = px <= options.materialize_limit_px;
        RasterGrid next = refine_level(levels[i - 1], ladder.levels[i], ladder.factor, backend, field,
                                       static_cast<int>(i), options, materialize, observer);
        if (options.quantize_levels && !next.empty())
            next = quantize_unit_8bit(next);
        if (!options.retain_levels)
            levels[i - 1] = RasterGrid();
        levels[i] = std::move(next);
        if (levels[i].empty())
            break;
    }
    return levels;
}

} // namespace strata::cascade

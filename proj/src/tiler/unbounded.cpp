#include "strata/tiler/unbounded.hpp"

#include "strata/core/errors.hpp"
#include "strata/core/parallel.hpp"
#include "strata/sampler/sample.hpp"

#include <algorithm>
#include <optional>

namespace strata::tiler {

using sampler::ConditionSet;

MergeMode merge_mode_from_string(const std::string& s)
{
    if (s == "centerCrop" || s == "center_crop")
        return MergeMode::CenterCrop;
    if (s == "feather")
        return MergeMode::Feather;
    throw ConfigError("unknown merge mode '" + s + "'");
}

const char* to_string(MergeMode m) noexcept
{
    return m == MergeMode::CenterCrop ? "centerCrop" : "feather";
}

namespace {

const RasterGrid& first_plane(const ConditionSet& cond)
{
    if (cond.planes.empty())
        throw ContractError("tiled generation needs at least one condition plane");
    const RasterGrid& ref = cond.planes.begin()->second;
    for (const auto& [name, p] : cond.planes)
        if (p.width() != ref.width() || p.height() != ref.height())
            throw ContractError("condition plane '" + name + "' does not match the extent");
    return ref;
}

RasterGrid pad_replicate(const RasterGrid& r, int w, int h)
{
    if (r.width() == w && r.height() == h)
        return r;
    RasterGrid out(w, h, r.channels(), r.gsd(), r.anchor());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sx = std::min(x, r.width() - 1);
            const int sy = std::min(y, r.height() - 1);
            for (int c = 0; c < r.channels(); ++c)
                out(x, y, c) = r(sx, sy, c);
        }
    return out;
}

ConditionSet crop_cond(const ConditionSet& cond, int x0, int y0, int w, int h)
{
    ConditionSet out;
    out.resolution_embedding = cond.resolution_embedding;
    out.target_gsd = cond.target_gsd;
    out.prompt = cond.prompt;
    out.view_index = cond.view_index;
    out.level = cond.level;
    out.extras = cond.extras;
    out.origin = {cond.origin.x + x0, cond.origin.y + y0};
    for (const auto& [name, p] : cond.planes)
        out.planes.emplace(name, p.crop(x0, y0, w, h));
    return out;
}

NoiseField window_field(const NoiseField& field, NoiseMode mode, WorldPixel origin)
{
    if (mode == NoiseMode::Shared)
        return field;
    const std::uint64_t key = mix64(static_cast<std::uint64_t>(origin.x)) ^
                              mix64(static_cast<std::uint64_t>(origin.y) + 0x517cc1b727220a95ULL);
    return field.derive(key);
}

// Tent weight per axis; strictly positive.
double tent(int i, int n) { return std::min(i + 0.5, n - i - 0.5); }

struct Engine {
    const ConditionSet& cond;
    const sampler::LatentCodec* codec;
    const sampler::DenoiserBackend& backend;
    const NoiseField& field;
    const sampler::StepList& steps;
    const sampler::NoiseSchedule& schedule;
    const TileOptions& opt;
    int f = 1;
    int state_channels = 0;
    // Shared-mode noise precomputed over the whole extent in state space.
    std::optional<RasterGrid> shared_detail = std::nullopt;
    std::optional<RasterGrid> shared_init = std::nullopt;

    RasterGrid run_window(int x0, int y0) const
    {
        const int W = opt.window;
        ConditionSet sub = crop_cond(cond, x0, y0, W, W);
        const int sw = W / f;
        if (codec) {
            for (auto& [name, p] : sub.planes)
                p = codec->encode(p);
            sub.origin = {sub.origin.x / f, sub.origin.y / f};
        }
        const double gsd = cond.planes.begin()->second.gsd() * f;
        const Vec2 anchor = sub.planes.empty() ? Vec2{} : sub.planes.begin()->second.anchor();
        RasterGrid init;
        if (opt.noise == NoiseMode::Shared) {
            if (opt.detail_noise)
                sub.planes["world_noise"] = shared_detail->crop(x0 / f, y0 / f, sw, sw);
            init = shared_init->crop(x0 / f, y0 / f, sw, sw);
        } else {
            const NoiseField wf = window_field(field, opt.noise, sub.origin);
            if (opt.detail_noise)
                sub.planes["world_noise"] =
                    wf.block(opt.level, 0, sub.origin, sw, sw, state_channels, gsd, anchor);
            init = wf.block(opt.level, schedule.T, sub.origin, sw, sw, state_channels, gsd, anchor);
        }
        init.set_georef(gsd, anchor);
        RasterGrid out = sampler::sample(backend, sub, init, steps, schedule);
        if (codec)
            out = codec->decode(out, opt.channels);
        return out;
    }
};

RasterGrid run_tiled(const ConditionSet& cond_in, const sampler::LatentCodec* codec,
                     const sampler::DenoiserBackend& backend, const NoiseField& field,
                     const sampler::StepList& steps, const sampler::NoiseSchedule& schedule,
                     const TileOptions& opt)
{
    if (opt.sampler != SamplerKind::Ddim)
        throw ContractError("tiled generation requires the deterministic DDIM sampler");
    if (opt.channels <= 0)
        throw ContractError("tiled generation: channel count must be positive");
    const int f = codec ? codec->factor() : 1;
    if (codec) {
        if (!codec->block_local())
            throw ContractError("latent tiling requires a block-local codec");
        if (opt.window % 2 != 0 || (opt.window / 2) % f != 0)
            throw ContractError("latent tiling: window stride not divisible by codec factor");
        if (cond_in.origin.x % f != 0 || cond_in.origin.y % f != 0)
            throw ContractError("latent tiling: extent origin not aligned to codec blocks");
    }
    const RasterGrid& ref = first_plane(cond_in);
    const int W = ref.width();
    const int H = ref.height();
    if (W <= 0 || H <= 0)
        throw PlanError("tiled generation: empty extent");

    // Pad small or block-misaligned extents, generate, then crop.
    auto round_up = [f](int v) { return (v + f - 1) / f * f; };
    const int Wp = round_up(std::max(W, opt.window));
    const int Hp = round_up(std::max(H, opt.window));
    const ConditionSet* cond = &cond_in;
    ConditionSet padded;
    if (Wp != W || Hp != H) {
        padded = cond_in;
        for (auto& [name, p] : padded.planes)
            p = pad_replicate(p, Wp, Hp);
        cond = &padded;
    }

    const WindowPlan plan = plan_windows(Wp, Hp, opt.window);
    Engine eng{*cond, codec, backend, field, steps, schedule, opt};
    eng.f = f;
    eng.state_channels = codec ? codec->latent_channels(opt.channels) : opt.channels;
    if (opt.noise == NoiseMode::Shared) {
        const WorldPixel o{cond->origin.x / f, cond->origin.y / f};
        const double gsd = ref.gsd() * f;
        if (opt.detail_noise)
            eng.shared_detail = field.block(opt.level, 0, o, Wp / f, Hp / f, eng.state_channels, gsd, ref.anchor());
        eng.shared_init = field.block(opt.level, schedule.T, o, Wp / f, Hp / f, eng.state_channels, gsd, ref.anchor());
    }

    RasterGrid out(Wp, Hp, opt.channels, ref.gsd(), ref.anchor());
    std::vector<double> wsum;
    if (opt.merge == MergeMode::Feather)
        wsum.assign(static_cast<std::size_t>(Wp) * Hp, 0.0);
    const auto xc = plan.x_cuts();
    const auto yc = plan.y_cuts();
    const int C = opt.channels;
    const int win = opt.window;

    // One row of windows at a time bounds memory; merge order is row-major.
    for (std::size_t iy = 0; iy < plan.ys.size(); ++iy) {
        std::vector<RasterGrid> results(plan.xs.size());
        parallel::parallel_for(plan.xs.size(), [&](std::size_t ix) {
            results[ix] = eng.run_window(plan.xs[ix], plan.ys[iy]);
        });
        for (std::size_t ix = 0; ix < plan.xs.size(); ++ix) {
            const RasterGrid& r = results[ix];
            const int x0 = plan.xs[ix];
            const int y0 = plan.ys[iy];
            if (opt.merge == MergeMode::CenterCrop) {
                for (int y = yc[iy]; y < yc[iy + 1]; ++y)
                    for (int x = xc[ix]; x < xc[ix + 1]; ++x)
                        for (int c = 0; c < C; ++c)
                            out(x, y, c) = r(x - x0, y - y0, c);
            } else {
                for (int ly = 0; ly < win; ++ly) {
                    const double wy = tent(ly, win);
                    for (int lx = 0; lx < win; ++lx) {
                        const double w = wy * tent(lx, win);
                        const std::size_t p = static_cast<std::size_t>(y0 + ly) * Wp + (x0 + lx);
                        const double ws = wsum[p] + w;
                        const double k = w / ws;
                        for (int c = 0; c < C; ++c) {
                            double& o = out(x0 + lx, y0 + ly, c);
                            o += (r(lx, ly, c) - o) * k;
                        }
                        wsum[p] = ws;
                    }
                }
            }
        }
    }
    if (Wp != W || Hp != H)
        return out.crop(0, 0, W, H);
    return out;
}

} // namespace

RasterGrid generate_unbounded(const ConditionSet& cond, const sampler::DenoiserBackend& backend,
                              const NoiseField& field, const sampler::StepList& steps,
                              const sampler::NoiseSchedule& schedule, const TileOptions& options)
{
    return run_tiled(cond, nullptr, backend, field, steps, schedule, options);
}

RasterGrid generate_unbounded_latent(const ConditionSet& cond, const sampler::LatentCodec& codec,
                                     const sampler::DenoiserBackend& backend, const NoiseField& field,
                                     const sampler::StepList& steps, const sampler::NoiseSchedule& schedule,
                                     const TileOptions& options)
{
    return run_tiled(cond, &codec, backend, field, steps, schedule, options);
}

void generate_streamed(int width, int height, const ConditionProvider& provider,
                       const sampler::LatentCodec* codec, const sampler::DenoiserBackend& backend,
                       const NoiseField& field, const sampler::StepList& steps,
                       const sampler::NoiseSchedule& schedule, const TileOptions& options,
                       const StreamOptions& stream, const TileSink& sink)
{
    const int stride = options.window / 2;
    if (stream.tile <= 0 || stream.tile % stride != 0 || stream.margin % stride != 0 ||
        stream.margin < options.window)
        throw PlanError("stream tiles and margins must be stride multiples with margin >= window");
    if (width <= 0 || height <= 0)
        throw PlanError("generate_streamed: empty extent");
    for (int ty = 0; ty < height; ty += stream.tile)
        for (int tx = 0; tx < width; tx += stream.tile) {
            const int rx0 = std::max(0, tx - stream.margin);
            const int ry0 = std::max(0, ty - stream.margin);
            const int rx1 = std::min(width, tx + stream.tile + stream.margin);
            const int ry1 = std::min(height, ty + stream.tile + stream.margin);
            const ConditionSet cond = provider(rx0, ry0, rx1 - rx0, ry1 - ry0);
            const RasterGrid region = codec ? generate_unbounded_latent(cond, *codec, backend, field, steps,
                                                                        schedule, options)
                                            : generate_unbounded(cond, backend, field, steps, schedule, options);
            const int tw = std::min(stream.tile, width - tx);
            const int th = std::min(stream.tile, height - ty);
            sink(tx, ty, region.crop(tx - rx0, ty - ry0, tw, th));
        }
}

} // namespace strata::tiler

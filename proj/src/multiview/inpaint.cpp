#include "strata/multiview/inpaint.hpp"

#include "strata/core/errors.hpp"
#include "strata/core/parallel.hpp"
#include "strata/sampler/backends.hpp"
#include "strata/sampler/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace strata::multiview {

using sampler::ConditionSet;
using sampler::NoiseSchedule;

namespace {

double smoothstep(double a, double b, double x)
{
    const double t = std::clamp((x - a) / (b - a), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

double pulse(double u, double a, double b, double e)
{
    return smoothstep(a - e, a + e, u) * (1.0 - smoothstep(b - e, b + e, u));
}

double fract(double x) { return x - std::floor(x); }

std::unique_ptr<sampler::LatentCodec> codec_from(const ConditionSet& c)
{
    const auto& j = c.extras.at("codec");
    return sampler::make_codec(j.at("name").get<std::string>(), j.at("factor").get<int>());
}

} // namespace

void MultiViewBatch::validate() const
{
    if (views.empty())
        throw ContractError("MultiViewBatch: no views");
    const Intrinsics& k = views[0].intrinsics;
    for (const auto& v : views) {
        if (!(v.intrinsics == k))
            throw ContractError("MultiViewBatch: views disagree in intrinsics");
        if (v.rgb.channels() != 3 || v.lateral_mask.empty() || v.world_pos.empty() || v.normal.empty())
            throw ContractError("MultiViewBatch: view lacks rgb, mask, world_pos or normal");
        v.validate();
    }
}

RasterGrid stack_input(const RasterGrid& z, const RasterGrid& encoded, const RasterGrid& mask)
{
    if (z.width() != encoded.width() || z.height() != encoded.height() || z.width() != mask.width() ||
        z.height() != mask.height() || z.channels() != encoded.channels() || mask.channels() != 1)
        throw ContractError("stack_input: shapes disagree");
    const RasterGrid parts[] = {z, encoded, mask};
    return concat_channels(parts);
}

RasterGrid latent_mask(const RasterGrid& mask, int f)
{
    if (f < 1 || mask.width() % f || mask.height() % f)
        throw ContractError("latent_mask: size not divisible by the codec factor");
    RasterGrid out(mask.width() / f, mask.height() / f, 1, mask.gsd() * f, mask.anchor());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask(x, y) != 0.0)
                out(x / f, y / f) = 1.0;
    return out;
}

InpaintOptions::InpaintOptions()
    : schedule(sampler::linear_schedule()), steps(sampler::make_step_list(schedule.T, sampler::kDefaultSteps))
{
}

std::vector<RasterGrid> inpaint_views(const MultiViewBatch& batch, const sampler::DenoiserBackend& backend,
                                      const ViewEmbeddingTable& table, const tiler::NoiseField& field,
                                      const InpaintOptions& opt)
{
    if (!backend.supports(sampler::Task::MultiView))
        throw ContractError("inpaint_views: backend '" + backend.name() + "' has no cross-view support");
    batch.validate();
    const int n = batch.size();
    if (table.size() != n)
        throw ContractError("inpaint_views: embedding table size differs from view count");
    const auto codec = sampler::make_codec(opt.codec, opt.codec_factor);
    const int f = codec->factor();
    const NoiseSchedule& sched = opt.schedule;
    const sampler::StepList steps = sampler::normalize_step_list(opt.steps, sched.T);

    std::vector<RasterGrid> encoded(n), lmask(n), x(n), noise(n);
    std::vector<ConditionSet> conds(n);
    parallel::parallel_for(n, [&](std::size_t i) {
        const CameraView& v = batch.views[i];
        RasterGrid known = v.rgb;
        for (int yy = 0; yy < known.height(); ++yy)
            for (int xx = 0; xx < known.width(); ++xx)
                if (v.lateral_mask(xx, yy) != 0.0)
                    for (int c = 0; c < 3; ++c)
                        known(xx, yy, c) = 0.0;
        encoded[i] = codec->encode(known);
        lmask[i] = latent_mask(v.lateral_mask, f);
        noise[i] = field.derive(i).block(kMultiViewLevel, steps.front(), {}, encoded[i].width(),
                                         encoded[i].height(), encoded[i].channels());
        x[i] = noise[i];
        ConditionSet& c = conds[i];
        c.planes["encoded"] = encoded[i];
        c.planes["mask"] = lmask[i];
        c.planes["image"] = v.rgb;
        c.planes["pixel_mask"] = v.lateral_mask;
        c.planes["world_pos"] = v.world_pos;
        c.planes["normal"] = v.normal;
        c.view_index = static_cast<int>(i);
        c.extras["codec"] = {{"name", opt.codec}, {"factor", f}};
        c.extras["attention_radius"] = opt.attention_radius;
        c.extras["embedding"] = table.row(static_cast<int>(i));
    });
    std::vector<ConditionSet> prepared = backend.prepare_joint(conds);

    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
        const int t = steps[k], s = steps[k + 1];
        for (int i = 0; i < n; ++i)
            prepared[i].planes["u"] = stack_input(x[i], encoded[i], lmask[i]);
        std::vector<RasterGrid> eps;
        try {
            eps = backend.predict_noise_joint(x, t, sched, prepared);
        } catch (const ContractError&) {
            throw;
        } catch (const Error& e) {
            throw SamplingError("inpaint_views: backend failed at t=" + std::to_string(t) + ": " + e.what());
        }
        const double ra = std::sqrt(sched.alpha_bar[s]), rn = std::sqrt(1.0 - sched.alpha_bar[s]);
        parallel::parallel_for(n, [&](std::size_t i) {
            sampler::ddim_step_inplace(x[i].data(), eps[i].data(), t, s, sched);
            const int lc = x[i].channels();
            for (int yy = 0; yy < x[i].height(); ++yy)
                for (int xx = 0; xx < x[i].width(); ++xx)
                    if (lmask[i](xx, yy) == 0.0)
                        for (int c = 0; c < lc; ++c)
                            x[i](xx, yy, c) = s == 0 ? encoded[i](xx, yy, c)
                                                     : ra * encoded[i](xx, yy, c) + rn * noise[i](xx, yy, c);
        });
    }

    std::vector<RasterGrid> out(n);
    parallel::parallel_for(n, [&](std::size_t i) {
        const CameraView& v = batch.views[i];
        out[i] = codec->decode(x[i], 3);
        out[i].set_georef(v.rgb.gsd(), v.rgb.anchor());
        for (int yy = 0; yy < out[i].height(); ++yy)
            for (int xx = 0; xx < out[i].width(); ++xx)
                for (int c = 0; c < 3; ++c)
                    out[i](xx, yy, c) = v.lateral_mask(xx, yy) != 0.0 ? std::clamp(out[i](xx, yy, c), 0.0, 1.0)
                                                                      : v.rgb(xx, yy, c);
    });
    return out;
}

void facade_color(const Vec3& p, const Vec3& n, double* rgb)
{
    Vec3 axis = normalized(cross(WorldFrame::up, n));
    if (norm(axis) == 0.0)
        axis = {1.0, 0.0, 0.0};
    const double s = dot(p, axis);
    const double tint = 0.06 * std::sin(0.11 * p.x + 0.07 * p.y);
    const double base[3] = {0.78 + tint + 0.04 * n.x, 0.72 + tint, 0.62 + 0.5 * tint + 0.04 * n.y};
    const double glass[3] = {0.22, 0.27, 0.35};
    const double w = pulse(fract(s / 2.8), 0.3, 0.75, 0.06) * pulse(fract(p.z / 3.2), 0.3, 0.75, 0.05) *
                     smoothstep(1.5, 2.0, p.z);
    for (int c = 0; c < 3; ++c)
        rgb[c] = base[c] + (glass[c] - base[c]) * w;
}

FacadeBackend::FacadeBackend(FacadeParams p) : p_(p)
{
    if (!(p_.grain > 0.0) || p_.patch < 1 || !(p_.bandwidth_m > 0.0))
        throw ConfigError("facade: grain, patch and bandwidth must be positive");
}

RasterGrid FacadeBackend::predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                                        const ConditionSet& cond) const
{
    RasterGrid eps(x_t.width(), x_t.height(), x_t.channels(), x_t.gsd(), x_t.anchor());
    sampler::gaussian_prior_eps(x_t.data(), cond.plane("prior_mean").data(), p_.grain, s.alpha_bar[t], eps.data());
    return eps;
}

std::vector<ConditionSet> FacadeBackend::prepare_joint(std::span<const ConditionSet> conds) const
{
    std::vector<ConditionSet> out(conds.begin(), conds.end());
    parallel::parallel_for(out.size(), [&](std::size_t i) {
        ConditionSet& c = out[i];
        const auto codec = codec_from(c);
        const int f = codec->factor();
        const RasterGrid& img = c.plane("image");
        const RasterGrid& pm = c.plane("pixel_mask");
        const RasterGrid& wp = c.plane("world_pos");
        const RasterGrid& nm = c.plane("normal");
        RasterGrid mean = img;
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                if (pm(x, y) != 0.0)
                    facade_color({wp(x, y, 0), wp(x, y, 1), wp(x, y, 2)}, {nm(x, y, 0), nm(x, y, 1), nm(x, y, 2)},
                                 &mean(x, y, 0));
        c.planes["prior_mean"] = codec->encode(mean);

        // Patch tokens: mean world position of masked pixels, masked count.
        const int lw = img.width() / f, lh = img.height() / f;
        const int gx = (lw + p_.patch - 1) / p_.patch, gy = (lh + p_.patch - 1) / p_.patch;
        RasterGrid tok(gx, gy, 4);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                if (pm(x, y) != 0.0) {
                    const int tx = x / f / p_.patch, ty = y / f / p_.patch;
                    for (int k = 0; k < 3; ++k)
                        tok(tx, ty, k) += wp(x, y, k);
                    tok(tx, ty, 3) += 1.0;
                }
        for (int y = 0; y < gy; ++y)
            for (int x = 0; x < gx; ++x)
                if (tok(x, y, 3) > 0.0)
                    for (int k = 0; k < 3; ++k)
                        tok(x, y, k) /= tok(x, y, 3);
        c.planes["token_pos"] = tok;
    });
    return out;
}

std::vector<RasterGrid> FacadeBackend::predict_noise_joint(std::span<const RasterGrid> xs, int t,
                                                           const NoiseSchedule& s,
                                                           std::span<const ConditionSet> conds) const
{
    const int n = static_cast<int>(xs.size());
    if (n == 0 || conds.size() != xs.size())
        throw ContractError("facade: view and condition counts differ");
    const double ab = s.alpha_bar[t];
    const int radius = conds[0].extras.value("attention_radius", 1);
    const int ew = static_cast<int>(conds[0].extras.at("embedding").size());
    const int d = 4 + ew;
    const double rd = std::sqrt(static_cast<double>(d));
    const double h = p_.bandwidth_m;

    std::vector<RasterGrid> eps(n);
    std::vector<TokenArray> q(n), k(n), v(n);
    parallel::parallel_for(n, [&](std::size_t i) {
        const ConditionSet& c = conds[i];
        const RasterGrid& x = xs[i];
        const RasterGrid& lm = c.plane("mask");
        const RasterGrid& tok = c.plane("token_pos");
        eps[i] = predict_noise(x, t, s, c);
        const int gx = tok.width(), gy = tok.height(), nt = gx * gy;
        q[i] = TokenArray(nt, d);
        k[i] = TokenArray(nt, d);
        v[i] = TokenArray(nt, 3);
        std::vector<double> cnt(nt, 0.0);
        for (int y = 0; y < x.height(); ++y)
            for (int xx = 0; xx < x.width(); ++xx)
                if (lm(xx, y) != 0.0) {
                    const int id = (y / p_.patch) * gx + xx / p_.patch;
                    for (int ch = 0; ch < 3; ++ch) {
                        const double x0 = (x(xx, y, ch) - std::sqrt(1.0 - ab) * eps[i](xx, y, ch)) / std::sqrt(ab);
                        v[i].token(id)[ch] += x0;
                    }
                    cnt[id] += 1.0;
                }
        const auto& e = c.extras.at("embedding");
        for (int id = 0; id < nt; ++id) {
            double* qt = q[i].token(id);
            double* kt = k[i].token(id);
            if (cnt[id] > 0.0)
                for (int ch = 0; ch < 3; ++ch)
                    v[i].token(id)[ch] /= cnt[id];
            if (tok.data()[static_cast<std::size_t>(id) * 4 + 3] == 0.0) {
                kt[3] = -1e200; // no masked pixels: never attended to
                continue;
            }
            double p2 = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double pa = tok.data()[static_cast<std::size_t>(id) * 4 + a] / h;
                qt[a] = rd * pa;
                kt[a] = pa;
                p2 += pa * pa;
            }
            qt[3] = rd;
            kt[3] = -0.5 * p2;
            for (int j = 0; j < ew; ++j) {
                qt[4 + j] = rd * e[j].get<double>();
                kt[4 + j] = e[j].get<double>();
            }
        }
    });

    const auto pooled = cross_view_local_attention(q, k, v, radius);

    parallel::parallel_for(n, [&](std::size_t i) {
        const ConditionSet& c = conds[i];
        const RasterGrid& x = xs[i];
        const RasterGrid& lm = c.plane("mask");
        const int gx = c.plane("token_pos").width();
        RasterGrid mean = c.plane("prior_mean");
        bool any = false;
        for (int y = 0; y < x.height(); ++y)
            for (int xx = 0; xx < x.width(); ++xx)
                if (lm(xx, y) != 0.0) {
                    const int id = (y / p_.patch) * gx + xx / p_.patch;
                    for (int ch = 0; ch < 3; ++ch)
                        mean(xx, y, ch) += p_.mix * (pooled[i].token(id)[ch] - v[i].token(id)[ch]);
                    any = true;
                }
        if (any)
            sampler::gaussian_prior_eps(x.data(), mean.data(), p_.grain, ab, eps[i].data());
    });
    return eps;
}

void register_multiview_backends(sampler::BackendRegistry& registry)
{
    registry.add("facade", [](const nlohmann::json& j) {
        FacadeParams p;
        p.grain = j.value("grain", p.grain);
        p.mix = j.value("mix", p.mix);
        p.patch = j.value("patch", p.patch);
        p.bandwidth_m = j.value("bandwidth_m", p.bandwidth_m);
        return std::make_unique<FacadeBackend>(p);
    });
}

} // namespace strata::multiview

#include "strata/cascade/anchor.hpp"
#include "strata/cascade/cascade.hpp"
#include "strata/core/errors.hpp"
#include "strata/sampler/backends.hpp"
#include "strata/sampler/sample.hpp"
#include "strata/tiler/noise_field.hpp"
#include "strata/tiler/plan.hpp"
#include "strata/tiler/unbounded.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace strata;
using namespace strata::tiler;
using sampler::ConditionSet;

namespace {

RasterGrid smooth_field(int w, int h, int c, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = u(rng), b = u(rng), p = u(rng);
    RasterGrid r(w, h, c, 1.0, {64.0, -32.0});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k)
                r(x, y, k) = 0.5 + 0.3 * std::sin(0.05 * a * x + 0.07 * b * y + p + k);
    return r;
}

ConditionSet refine_cond(int w, int h, std::uint64_t seed)
{
    ConditionSet c;
    c.planes.emplace("lowres_up", smooth_field(w, h, 3, seed));
    c.origin = world_pixel_origin(c.plane("lowres_up"));
    return c;
}

} // namespace

TEST_CASE("normal quantile matches reference values")
{
    // Reference values from an independent inverse-CDF implementation.
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-14));
    CHECK(normal_quantile(0.3) == doctest::Approx(-0.5244005127080409).epsilon(1e-14));
    CHECK(normal_quantile(0.5) == 0.0);
    for (double p : {0.01, 0.2, 0.45})
        CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1.0 - p)).epsilon(1e-13));
}

TEST_CASE("noise field")
{
    const NoiseField f(123);
    const RasterGrid b = f.block(2, 5, {-7, 11}, 9, 4, 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 9; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(b(x, y, c) == f.draw(2, 5, -7 + x, 11 + y, c));
    CHECK(f.draw(0, 1, 3, 4, 0) != f.draw(0, 2, 3, 4, 0));
    CHECK(f.draw(0, 1, 3, 4, 0) != f.draw(1, 1, 3, 4, 0));
    CHECK(f.draw(0, 1, 3, 4, 0) != f.derive(1).draw(0, 1, 3, 4, 0));
    CHECK(NoiseField(123).draw(0, 1, 3, 4, 0) == f.draw(0, 1, 3, 4, 0));

    // 10^6 draws: N(0,1) marginal, no neighbour correlation.
    const RasterGrid big = f.block(0, 50, {1000, -2000}, 1000, 1000, 1);
    double s1 = 0.0, s2 = 0.0, lag = 0.0;
    for (int y = 0; y < 1000; ++y)
        for (int x = 0; x < 1000; ++x) {
            const double v = big(x, y);
            s1 += v;
            s2 += v * v;
            if (x > 0)
                lag += v * big(x - 1, y);
        }
    const double n = 1e6;
    CHECK(std::fabs(s1 / n) < 0.02);
    CHECK(std::fabs(s2 / n - 1.0) < 0.05);
    CHECK(std::fabs(lag / (n - 1000)) < 0.01);
}

TEST_CASE("window plans")
{
    CHECK(plan_windows(64, 64, 64).windows.size() == 1);
    CHECK(plan_windows(96, 64, 64).windows.size() == 2);
    const WindowPlan p = plan_windows(256, 256, 64);
    CHECK(p.windows.size() == 49);
    CHECK(p.stride == 32);

    const WindowPlan q = plan_windows(200, 70, 64);
    CHECK(q.xs.back() == 136);
    CHECK(q.ys == std::vector<int>{0, 6});
    // Cuts partition the extent and every owned range lies inside its window.
    const auto xc = q.x_cuts();
    CHECK(xc.front() == 0);
    CHECK(xc.back() == 200);
    for (std::size_t k = 0; k < q.xs.size(); ++k) {
        CHECK(xc[k] < xc[k + 1]);
        CHECK(xc[k] >= q.xs[k]);
        CHECK(xc[k + 1] <= q.xs[k] + 64);
    }
    CHECK(plan_windows(10, 10, 64).windows.size() == 1);
    CHECK_THROWS_AS(plan_windows(0, 10, 64), PlanError);
    CHECK_THROWS_AS(plan_windows(10, 10, 63), PlanError);
    CHECK(plan_to_json(p)["xs"].size() == 7);
}

TEST_CASE("single window equals a direct sample")
{
    const auto s = sampler::linear_schedule();
    const auto steps = sampler::make_step_list(s.T, 10);
    sampler::FractalRefinerBackend b;
    const NoiseField field(9);
    const ConditionSet c = refine_cond(64, 64, 1);
    TileOptions opt;
    const RasterGrid tiled = generate_unbounded(c, b, field, steps, s, opt);

    ConditionSet direct = c;
    direct.planes["world_noise"] = field.block(0, 0, c.origin, 64, 64, 3);
    const RasterGrid init = field.block(0, s.T, c.origin, 64, 64, 3);
    const RasterGrid ref = sampler::sample(b, direct, init, steps, s);
    CHECK(tiled.data().size() == ref.data().size());
    CHECK(std::equal(ref.data().begin(), ref.data().end(), tiled.data().begin()));
    CHECK(tiled.anchor() == c.plane("lowres_up").anchor());
}

TEST_CASE("overlapping windows agree away from their borders")
{
    const auto s = sampler::linear_schedule();
    const auto steps = sampler::make_step_list(s.T, 10);
    sampler::FractalRefinerBackend b;
    const NoiseField field(4);
    const ConditionSet c = refine_cond(96, 64, 2);
    const int r = b.receptive_radius();

    auto window = [&](int x0) {
        ConditionSet sub;
        sub.planes.emplace("lowres_up", c.plane("lowres_up").crop(x0, 0, 64, 64));
        sub.origin = {c.origin.x + x0, c.origin.y};
        sub.planes["world_noise"] = field.block(0, 0, sub.origin, 64, 64, 3);
        return sampler::sample(b, sub, field.block(0, s.T, sub.origin, 64, 64, 3), steps, s);
    };
    const RasterGrid a = window(0);
    const RasterGrid d = window(32);
    int compared = 0;
    for (int y = r + 1; y < 64 - r - 1; ++y)
        for (int x = 32 + r + 1; x < 64 - r - 1; ++x)
            for (int k = 0; k < 3; ++k) {
                CHECK(a(x, y, k) == d(x - 32, y, k));
                ++compared;
            }
    CHECK(compared > 0);
}

TEST_CASE("sub-extent and streamed generation reproduce the monolithic result")
{
    const auto s = sampler::linear_schedule();
    const auto steps = sampler::make_step_list(s.T, 8);
    sampler::FractalRefinerBackend b({4, 0.05, 0.01});
    const NoiseField field(77);
    TileOptions opt;
    opt.window = 32;
    const ConditionSet c = refine_cond(160, 128, 3);

    for (MergeMode m : {MergeMode::CenterCrop, MergeMode::Feather}) {
        opt.merge = m;
        const RasterGrid full = generate_unbounded(c, b, field, steps, s, opt);
        auto provider = [&](int x0, int y0, int w, int h) {
            ConditionSet sub;
            sub.planes.emplace("lowres_up", c.plane("lowres_up").crop(x0, y0, w, h));
            sub.origin = {c.origin.x + x0, c.origin.y + y0};
            return sub;
        };
        RasterGrid streamed(160, 128, 3);
        int tiles = 0;
        generate_streamed(160, 128, provider, nullptr, b, field, steps, s, opt, {64, 32},
                          [&](int x0, int y0, const RasterGrid& t) {
                              ++tiles;
                              for (int y = 0; y < t.height(); ++y)
                                  for (int x = 0; x < t.width(); ++x)
                                      for (int k = 0; k < 3; ++k)
                                          streamed(x0 + x, y0 + y, k) = t(x, y, k);
                          });
        CHECK(tiles == 6);
        CHECK(std::equal(full.data().begin(), full.data().end(), streamed.data().begin()));
    }

    SUBCASE("latent path")
    {
        sampler::BlockDctCodec codec(4);
        sampler::GaussianPriorBackend g(0.05);
        ConditionSet lc;
        lc.planes.emplace("prior_mean", smooth_field(128, 96, 1, 5));
        lc.origin = world_pixel_origin(lc.plane("prior_mean"));
        opt.channels = 1;
        opt.merge = MergeMode::CenterCrop;
        const RasterGrid full = generate_unbounded_latent(lc, codec, g, field, steps, s, opt);
        CHECK(full.width() == 128);
        CHECK(full.channels() == 1);
        RasterGrid streamed(128, 96, 1);
        generate_streamed(
            128, 96,
            [&](int x0, int y0, int w, int h) {
                ConditionSet sub;
                sub.planes.emplace("prior_mean", lc.plane("prior_mean").crop(x0, y0, w, h));
                sub.origin = {lc.origin.x + x0, lc.origin.y + y0};
                return sub;
            },
            &codec, g, field, steps, s, opt, {64, 32},
            [&](int x0, int y0, const RasterGrid& t) {
                for (int y = 0; y < t.height(); ++y)
                    for (int x = 0; x < t.width(); ++x)
                        streamed(x0 + x, y0 + y) = t(x, y);
            });
        CHECK(std::equal(full.data().begin(), full.data().end(), streamed.data().begin()));
    }
}

TEST_CASE("latent refinement tiles equal one window over the extent")
{
    const auto s = sampler::linear_schedule();
    const auto steps = sampler::make_step_list(s.T, 8);
    const sampler::BlockDctCodec codec(4);
    const sampler::LatentFractalRefinerBackend b({8, 0.04, 0.01}, 4);
    const NoiseField field(12);
    const ConditionSet c = refine_cond(128, 128, 6);
    TileOptions opt;
    opt.window = 64;
    const RasterGrid tiled = generate_unbounded_latent(c, codec, b, field, steps, s, opt);
    opt.window = 128;
    CHECK(tiled == generate_unbounded_latent(c, codec, b, field, steps, s, opt));
    opt.window = 64;
    opt.noise = NoiseMode::Independent;
    CHECK(tiled != generate_unbounded_latent(c, codec, b, field, steps, s, opt));
}

TEST_CASE("tiling contracts")
{
    const auto s = sampler::linear_schedule();
    const auto steps = sampler::make_step_list(s.T, 4);
    sampler::PointMassBackend b;
    const NoiseField field(1);
    ConditionSet c;
    c.planes.emplace("target", smooth_field(20, 12, 3, 1));
    TileOptions opt;
    // Small extents are padded and cropped back.
    const RasterGrid small = generate_unbounded(c, b, field, steps, s, opt);
    CHECK(small.width() == 20);
    CHECK(small.height() == 12);
    for (std::size_t i = 0; i < small.size(); ++i)
        CHECK(small.data()[i] == doctest::Approx(c.plane("target").data()[i]).epsilon(1e-6));

    opt.sampler = SamplerKind::Ddpm;
    CHECK_THROWS_AS(generate_unbounded(c, b, field, steps, s, opt), ContractError);
    opt.sampler = SamplerKind::Ddim;
    CHECK_THROWS_AS(generate_unbounded(ConditionSet{}, b, field, steps, s, opt), ContractError);
    CHECK_THROWS_AS(merge_mode_from_string("blend"), ConfigError);
    CHECK(merge_mode_from_string("centerCrop") == MergeMode::CenterCrop);

    opt.noise = NoiseMode::Independent;
    CHECK(generate_unbounded(c, b, field, steps, s, opt) == generate_unbounded(c, b, field, steps, s, opt));
}

TEST_CASE("upsample regions are exact crops of the full upsample")
{
    RasterGrid low(7, 5, 2, 16.0, {320.0, 640.0});
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (double& v : low.data())
        v = u(rng);
    const RasterGrid up = cascade::upsample(low, 4);
    CHECK(up.width() == 28);
    CHECK(up.gsd() == 4.0);
    CHECK(up.anchor() == low.anchor());
    const RasterGrid part = cascade::upsample_region(low, 4, 5, 3, 11, 9);
    CHECK(part == up.crop(5, 3, 11, 9));

    RasterGrid flat(3, 3, 1, 4.0, {}, 0.625);
    const RasterGrid flat_up = cascade::upsample(flat, 4);
    for (double v : flat_up.data())
        CHECK(v == 0.625);

    const ConditionSet c = cascade::assemble_condition(low, 4.0, 4);
    CHECK(c.plane("lowres_up") == up);
    CHECK(c.resolution_embedding.size() == cascade::kEmbeddingDim);
    CHECK(c.origin.x == 80);
    CHECK(c.origin.y == -160);
    CHECK_THROWS_AS(cascade::assemble_condition(low, 5.0, 4), LadderError);
}

TEST_CASE("ladder")
{
    cascade::ScaleLadder l;
    CHECK_NOTHROW(l.validate());
    CHECK(cascade::ladder_from_json(cascade::ladder_to_json(l)).levels == l.levels);
    l.levels = {64, 16, 5, 1};
    CHECK_THROWS_AS(l.validate(), LadderError);
}

TEST_CASE("cascade")
{
    cascade::ScaleLadder ladder;
    ladder.levels = {64, 16, 4};
    cascade::AnchorSpec spec{"urban", 5, 16};
    const RasterGrid anchor = cascade::procedural_anchor(spec, 64.0);
    cascade::CascadeOptions opt;
    opt.steps = sampler::make_step_list(opt.schedule.T, 6);
    opt.tile.window = 32;

    SUBCASE("condition echo reduces to repeated upsampling")
    {
        sampler::ConditionEchoBackend echo;
        const auto levels = cascade::run_cascade(anchor, ladder, echo, 1, opt);
        REQUIRE(levels.size() == 3);
        const RasterGrid ref = cascade::upsample(cascade::upsample(anchor, 4), 4);
        CHECK(levels[2].width() == 256);
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(levels[2].data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-6));
    }

    sampler::FractalRefinerBackend b;
    const auto full = cascade::run_cascade(anchor, ladder, b, 3, opt);

    SUBCASE("each level depends only on its predecessor")
    {
        cascade::CascadeOptions m = opt;
        m.retain_levels = false;
        const auto lean = cascade::run_cascade(anchor, ladder, b, 3, m);
        CHECK(lean[0].empty());
        CHECK(lean[2] == full[2]);
        const RasterGrid again = cascade::refine_once(full[1], 4.0, 4, b, tiler::NoiseField(3), 2, opt);
        CHECK(again == full[2]);
    }
    SUBCASE("streamed levels match in-memory levels")
    {
        cascade::CascadeOptions st = opt;
        st.stream_threshold_px = 64 * 64;
        st.stream = {64, 32};
        std::map<int, int> seen;
        const auto streamed = cascade::run_cascade(anchor, ladder, b, 3, st,
                                                   [&](int level, int, int, const RasterGrid&) { ++seen[level]; });
        CHECK(streamed[2] == full[2]);
        CHECK(seen[2] == 16);

        st.materialize_limit_px = 64 * 64;
        const auto unseen = cascade::run_cascade(anchor, ladder, b, 3, st, {});
        CHECK(unseen[2].empty());
    }
    SUBCASE("seed changes the output")
    {
        const auto other = cascade::run_cascade(anchor, ladder, b, 4, opt);
        CHECK(other[2] != full[2]);
    }
    CHECK_THROWS_AS(cascade::run_cascade(anchor.crop(0, 0, 8, 8), {{32, 8}, 4, 256}, b, 1, opt), LadderError);
}

TEST_CASE("procedural anchors")
{
    for (const auto& cls : cascade::anchor_classes()) {
        const RasterGrid a = cascade::procedural_anchor({cls, 1, 32}, 64.0);
        CHECK(a.width() == 32);
        CHECK(a.channels() == 3);
        for (double v : a.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(a == cascade::procedural_anchor({cls, 1, 32}, 64.0));
        CHECK(a != cascade::procedural_anchor({cls, 2, 32}, 64.0));
    }
    CHECK_THROWS_AS(cascade::procedural_anchor({"desert", 1, 32}, 64.0), ConfigError);
}

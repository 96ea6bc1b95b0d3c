#include "strata/core/errors.hpp"
#include "strata/core/exact_sum.hpp"
#include "strata/metrics/metrics.hpp"
#include "strata/multiview/attention.hpp"
#include "strata/multiview/bundle.hpp"
#include "strata/multiview/inpaint.hpp"
#include "strata/multiview/rasterize.hpp"
#include "strata/multiview/trajectory.hpp"
#include "strata/sampler/backends.hpp"
#include "strata/scenes/scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>

using namespace strata;
using namespace strata::multiview;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Ray from the camera center through pixel center (x, y), world frame.
Vec3 pixel_ray(const CameraView& v, int x, int y)
{
    const Intrinsics& k = v.intrinsics;
    const Vec3 c{(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0};
    return v.pose.R.transposed() * c;
}

struct Hit {
    double t = kInf;
    bool wall = false;
    bool near_edge = false;
};

// Nearest intersection with an axis-aligned box [lo, hi] sitting on the
// ground plane z = 0 (ground limited to |x|,|y| <= half).
Hit cast_box(const Vec3& o, const Vec3& d, Vec3 lo, Vec3 hi, double half)
{
    Hit best;
    auto consider = [&](double t, bool wall, double u, double ulo, double uhi, double w, double wlo, double whi) {
        if (!(t > 0.0) || t >= best.t)
            return;
        if (u < ulo || u > uhi || w < wlo || w > whi)
            return;
        const double m = std::min({u - ulo, uhi - u, w - wlo, whi - w});
        best = {t, wall, m < 1e-7};
    };
    const double p[3] = {o.x, o.y, o.z}, q[3] = {d.x, d.y, d.z};
    const double l[3] = {lo.x, lo.y, lo.z}, h[3] = {hi.x, hi.y, hi.z};
    for (int axis = 0; axis < 3; ++axis)
        for (double plane : {l[axis], h[axis]}) {
            if (axis == 2 && plane == l[2])
                continue; // box bottom is hidden in the ground
            if (q[axis] == 0.0)
                continue;
            const double t = (plane - p[axis]) / q[axis];
            const int a = (axis + 1) % 3, b = (axis + 2) % 3;
            consider(t, axis != 2, p[a] + t * q[a], l[a], h[a], p[b] + t * q[b], l[b], h[b]);
        }
    if (d.z != 0.0) {
        const double t = -o.z / d.z;
        consider(t, false, o.x + t * d.x, -half, half, o.y + t * d.y, -half, half);
    }
    return best;
}

std::vector<TokenArray> random_tokens(std::mt19937_64& rng, int n, int count, int dim)
{
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<TokenArray> out(n, TokenArray(count, dim));
    for (auto& a : out)
        for (double& x : a.data)
            x = g(rng);
    return out;
}

// Global attention over every view's keys with an additive mask; masked
// keys contribute exp(-inf) = 0.
std::vector<TokenArray> masked_global(const std::vector<TokenArray>& q, const std::vector<TokenArray>& k,
                                      const std::vector<TokenArray>& v, int radius)
{
    const int n = static_cast<int>(q.size()), d = q[0].dim, tk = k[0].count;
    std::vector<TokenArray> out(n, TokenArray(q[0].count, v[0].dim));
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < q[i].count; ++t) {
            std::vector<double> logit(static_cast<std::size_t>(n) * tk);
            double m = -kInf;
            for (int j = 0; j < n; ++j) {
                const int dist = std::min(std::abs(i - j), n - std::abs(i - j));
                for (int s = 0; s < tk; ++s) {
                    double dotv = 0.0;
                    for (int c = 0; c < d; ++c)
                        dotv += q[i].token(t)[c] * k[j].token(s)[c];
                    logit[j * tk + s] = dist <= radius ? dotv * (1.0 / std::sqrt(double(d))) : -kInf;
                    m = std::max(m, logit[j * tk + s]);
                }
            }
            ExactSum z;
            for (double l : logit)
                z.add(std::exp(l - m));
            for (int c = 0; c < v[0].dim; ++c) {
                ExactSum acc;
                for (int j = 0; j < n; ++j)
                    for (int s = 0; s < tk; ++s)
                        acc.add(std::exp(logit[j * tk + s] - m) * v[j].token(s)[c]);
                out[i].token(t)[c] = acc.value() / z.value();
            }
        }
    return out;
}

MultiViewBatch box_batch(int size, int n)
{
    const scenes::Scene s = scenes::make_scene("box");
    TexturedMesh block;
    scenes::add_building(block, s.buildings[0], scenes::kGroundHalf);
    const auto poses = circular_trajectory(default_trajectory(block, n));
    MultiViewBatch b;
    b.views = render_views(s.mesh, fov_intrinsics(size, size, 60.0), poses);
    return b;
}

} // namespace

TEST_CASE("circular trajectory")
{
    Trajectory t;
    t.center = {3, -2, 5};
    t.radius = 40;
    const auto poses = circular_trajectory(t);
    REQUIRE(poses.size() == 8);
    for (int i = 0; i < 8; ++i) {
        const Vec3 c = poses[i].center();
        const double az = std::atan2(c.y - t.center.y, c.x - t.center.x) * 180.0 / std::numbers::pi;
        CHECK(std::remainder(az - 45.0 * i, 360.0) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(norm(c - t.center) == doctest::Approx(40.0));
        CHECK(poses[i].R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
        const Mat3 rrt = poses[i].R * poses[i].R.transposed();
        for (int r = 0; r < 3; ++r)
            for (int q = 0; q < 3; ++q)
                CHECK(std::fabs(rrt(r, q) - (r == q)) < 1e-12);
        // Center lands on the principal point at depth = radius.
        const auto p = project_point(t.center, fov_intrinsics(64, 64, 60), poses[i]);
        REQUIRE(p);
        CHECK(p->x == doctest::Approx(31.5));
        CHECK(p->y == doctest::Approx(31.5));
        CHECK(p->depth == doctest::Approx(40.0));
        // Image up points toward +z.
        CHECK(poses[i].R.row(1).z < 0.0);
    }

    t.n = 1;
    CHECK(norm(circular_trajectory(t)[0].center() - t.center) == doctest::Approx(40.0));

    t.n = 4;
    const auto four = circular_trajectory(t);
    const Vec3 c0 = four[0].center() - t.center, c2 = four[2].center() - t.center;
    CHECK(std::fabs(c2.x + c0.x) < 1e-9);
    CHECK(std::fabs(c2.y + c0.y) < 1e-9);
    CHECK(std::fabs(c2.z - c0.z) < 1e-9);

    CHECK_THROWS_AS(look_at({1, 2, 3}, {1, 2, 3}), DegenerateGeometryError);
    t.radius = 0;
    CHECK_THROWS_AS(circular_trajectory(t), DomainError);
    t.radius = 1;
    t.n = 0;
    CHECK_THROWS_AS(circular_trajectory(t), DomainError);
}

TEST_CASE("rasterize: ground quad from above")
{
    TexturedMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    m.face_class = {FaceClass::Horizontal, FaceClass::Horizontal};
    m.uv = {{Vec2{0, 1}, Vec2{1, 1}, Vec2{1, 0}}, {Vec2{0, 1}, Vec2{1, 0}, Vec2{0, 0}}};
    m.face_texture = {0, 0};
    RasterGrid tex(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            for (int c = 0; c < 3; ++c)
                tex(x, y, c) = (x + 2 * y + c) / 100.0;
    m.textures = {tex};

    const double h = 7.0;
    const CameraPose pose = look_at({0.5, 0.5, h}, {0.5, 0.5, 0});
    Intrinsics k{32 * h, 32 * h, 15.5, 15.5, 32, 32};
    const CameraView v = rasterize(m, k, pose);
    v.validate();
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(v.lateral_mask(x, y) == 0.0);
            CHECK(std::fabs(v.depth(x, y) - h) < 1e-9);
            CHECK(v.face_id[y * 32 + x] >= 0);
            // Texel centers line up with pixel centers: the texture comes back.
            for (int c = 0; c < 3; ++c)
                CHECK(std::fabs(v.rgb(x, y, c) - tex(x, y, c)) < 1e-9);
        }

    // Nothing projects: empty view.
    const CameraView away = rasterize(m, k, look_at({0.5, 0.5, -h}, {0.5, 0.5, -2 * h}));
    for (double d : away.depth.data())
        CHECK(d == kInf);
}

TEST_CASE("rasterize: box oracle")
{
    const scenes::Scene s = scenes::make_scene("box");
    const Intrinsics k = fov_intrinsics(96, 80, 55.0);
    int walls = 0, checked = 0;
    for (const Vec3 eye : {Vec3{35, -22, 18}, Vec3{-8, 30, 6}, Vec3{25, 25, 40}}) {
        const CameraView v = rasterize(s.mesh, k, look_at(eye, {0, 0, 4}));
        const Vec3 fwd = v.pose.R.row(2);
        for (int y = 0; y < k.height; ++y)
            for (int x = 0; x < k.width; ++x) {
                const Vec3 d = pixel_ray(v, x, y);
                const Hit hit = cast_box(eye, d, {-10, -10, 0}, {10, 10, 10}, scenes::kGroundHalf);
                if (hit.near_edge)
                    continue;
                ++checked;
                if (hit.t == kInf) {
                    CHECK(v.face_id[y * k.width + x] == -1);
                    continue;
                }
                CHECK(v.lateral_mask(x, y) == (hit.wall ? 1.0 : 0.0));
                CHECK(std::fabs(v.depth(x, y) - hit.t * dot(d, fwd)) < 1e-6);
                walls += hit.wall;
            }
    }
    CHECK(walls > 500);
    CHECK(checked > 3 * 96 * 80 - 100);
}

TEST_CASE("rasterize: coincident faces keep the lower index")
{
    TexturedMesh m;
    m.vertices = {{-1, -1, 0}, {1, -1, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}, {0, 1, 2}};
    m.face_class = {FaceClass::Horizontal, FaceClass::Vertical};
    m.uv = {{}, {}};
    m.face_texture = {-1, -1};
    const CameraView v = rasterize(m, fov_intrinsics(40, 40, 60), look_at({0, 0, 5}, {0, 0, 0}));
    int covered = 0;
    for (int id : v.face_id) {
        CHECK(id <= 0);
        covered += id == 0;
    }
    CHECK(covered > 50);
    for (double mval : v.lateral_mask.data())
        CHECK(mval == 0.0);
}

TEST_CASE("view embedding")
{
    const ViewEmbeddingTable t(8, 5, 42);
    for (int a = 0; a < 8; ++a)
        for (int b = a + 1; b < 8; ++b) {
            double d2 = 0;
            for (int c = 0; c < 5; ++c)
                d2 += std::pow(t.row(a)[c] - t.row(b)[c], 2);
            CHECK(std::sqrt(d2) > 1e-6);
        }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    RasterGrid f(6, 4, 5);
    for (double& v : f.data())
        v = u(rng);
    CHECK(inject_view_embedding(f, 3, ViewEmbeddingTable::zeros(8, 5)) == f);
    const RasterGrid z = inject_view_embedding(RasterGrid(6, 4, 5), 2, t);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 5; ++c)
                CHECK(z(x, y, c) == t.row(2)[c]);
    const RasterGrid a = inject_view_embedding(f, 0, t), b = inject_view_embedding(f, 1, t);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 5; ++c)
                CHECK(a(x, y, c) - b(x, y, c) == doctest::Approx(t.row(0)[c] - t.row(1)[c]).epsilon(1e-12));
    CHECK_THROWS_AS(inject_view_embedding(RasterGrid(2, 2, 4), 0, t), ContractError);
    CHECK_THROWS_AS(inject_view_embedding(f, 8, t), ContractError);
    CHECK(ViewEmbeddingTable(8, 5, 42).row(7) == t.row(7));
}

TEST_CASE("cross-view local attention")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto q = random_tokens(rng, 8, 2, 4), k = random_tokens(rng, 8, 2, 4), v = random_tokens(rng, 8, 2, 3);
        std::vector<std::vector<double>> w;
        const auto out = cross_view_local_attention(q, k, v, 1, &w);
        const auto ref = masked_global(q, k, v, 1);
        for (int i = 0; i < 8; ++i) {
            for (std::size_t e = 0; e < out[i].data.size(); ++e)
                CHECK(std::fabs(out[i].data[e] - ref[i].data[e]) <= 1e-6);
            // Rows are stochastic and outputs stay inside the value hull.
            const std::size_t keys = 3 * 2;
            for (int t = 0; t < 2; ++t) {
                double s = 0;
                for (std::size_t r = 0; r < keys; ++r)
                    s += w[i][t * keys + r];
                CHECK(std::fabs(s - 1.0) <= 1e-6);
                for (int c = 0; c < 3; ++c) {
                    double lo = kInf, hi = -kInf;
                    for (int j : view_neighbourhood(i, 8))
                        for (int u = 0; u < 2; ++u) {
                            lo = std::min(lo, v[j].token(u)[c]);
                            hi = std::max(hi, v[j].token(u)[c]);
                        }
                    CHECK(out[i].token(t)[c] >= lo - 1e-12);
                    CHECK(out[i].token(t)[c] <= hi + 1e-12);
                }
            }
        }
    }

    // N = 3 covers every view: bit-identical to unmasked global attention.
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = random_tokens(rng, 3, 5, 6), k = random_tokens(rng, 3, 4, 6), v = random_tokens(rng, 3, 4, 2);
        const auto out = cross_view_local_attention(q, k, v);
        const auto ref = masked_global(q, k, v, 3);
        for (int i = 0; i < 3; ++i)
            CHECK(out[i].data == ref[i].data);
    }

    // N = 1 is plain self-attention.
    {
        const auto q = random_tokens(rng, 1, 3, 4), k = random_tokens(rng, 1, 3, 4), v = random_tokens(rng, 1, 3, 2);
        const auto out = cross_view_local_attention(q, k, v);
        for (int t = 0; t < 3; ++t) {
            double l[3], m = -kInf, z = 0;
            for (int s = 0; s < 3; ++s) {
                l[s] = 0;
                for (int c = 0; c < 4; ++c)
                    l[s] += q[0].token(t)[c] * k[0].token(s)[c];
                l[s] /= 2.0;
                m = std::max(m, l[s]);
            }
            for (double x : l)
                z += std::exp(x - m);
            for (int c = 0; c < 2; ++c) {
                double o = 0;
                for (int s = 0; s < 3; ++s)
                    o += std::exp(l[s] - m) / z * v[0].token(s)[c];
                CHECK(out[0].token(t)[c] == doctest::Approx(o).epsilon(1e-12));
            }
        }
    }

    // Rotating views (and the embedded inputs with them) rotates outputs exactly.
    {
        const int n = 8;
        const auto x = random_tokens(rng, n, 3, 5);
        const ViewEmbeddingTable table(n, 5, 9);
        auto embed = [&](const std::vector<TokenArray>& in, const ViewEmbeddingTable& tb) {
            auto o = in;
            for (int i = 0; i < n; ++i)
                for (int t = 0; t < 3; ++t)
                    for (int c = 0; c < 5; ++c)
                        o[i].token(t)[c] += tb.row(i)[c];
            return o;
        };
        const auto f = embed(x, table);
        const auto out = cross_view_local_attention(f, f, f);
        std::vector<TokenArray> xr(n);
        for (int i = 0; i < n; ++i)
            xr[i] = x[(i + 1) % n];
        const auto fr = embed(xr, table.rotated(1));
        const auto outr = cross_view_local_attention(fr, fr, fr);
        for (int i = 0; i < n; ++i)
            CHECK(outr[i].data == out[(i + 1) % n].data);

        // Swapping two views' inputs is not a mere output swap once embedded.
        std::vector<TokenArray> xs = x;
        std::swap(xs[0], xs[1]);
        const auto fs = embed(xs, table);
        const auto outs = cross_view_local_attention(fs, fs, fs);
        CHECK(outs[0].data != out[1].data);
        CHECK(outs[1].data != out[0].data);
    }

    std::vector<TokenArray> none;
    CHECK_THROWS_AS(cross_view_local_attention(none, none, none), ContractError);
    const std::vector<TokenArray> zero(2, TokenArray(2, 0));
    CHECK_THROWS_AS(cross_view_local_attention(zero, zero, zero), ContractError);
    CHECK(view_neighbourhood(0, 8) == std::vector<int>{0, 1, 7});
    CHECK(view_neighbourhood(0, 2) == std::vector<int>{0, 1});
    CHECK(view_neighbourhood(3, 8, 2) == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("stacked input layout")
{
    RasterGrid z(4, 4, 3, 1, {}, 1.0), e(4, 4, 3, 1, {}, 2.0), m(4, 4, 1, 1, {}, 3.0);
    const RasterGrid u = stack_input(z, e, m);
    CHECK(u.channels() == 7);
    CHECK(u(1, 2, 0) == 1.0);
    CHECK(u(1, 2, 3) == 2.0);
    CHECK(u(1, 2, 6) == 3.0);
    CHECK_THROWS_AS(stack_input(z, m, m), ContractError);
    RasterGrid pm(8, 8, 1);
    pm(5, 2) = 1.0;
    const RasterGrid lm = latent_mask(pm, 4);
    CHECK(lm(1, 0) == 1.0);
    CHECK(lm(0, 0) == 0.0);
}

TEST_CASE("inpaint views")
{
    const int sz = 192;
    MultiViewBatch batch = box_batch(sz, 8);
    batch.validate();
    const ViewEmbeddingTable table(8, 4, 1);
    const tiler::NoiseField field(5);
    const FacadeBackend backend;
    InpaintOptions opt;
    opt.steps = sampler::make_step_list(opt.schedule.T, 12);

    const auto j1 = inpaint_views(batch, backend, table, field, opt);
    const auto j2 = inpaint_views(batch, backend, table, field, opt);
    REQUIRE(j1.size() == 8);
    for (int i = 0; i < 8; ++i) {
        CHECK(j1[i] == j2[i]);
        for (int y = 0; y < sz; ++y)
            for (int x = 0; x < sz; ++x)
                if (batch.views[i].lateral_mask(x, y) == 0.0)
                    for (int c = 0; c < 3; ++c)
                        CHECK(j1[i](x, y, c) == batch.views[i].rgb(x, y, c));
    }

    // Adjacent views agree on the same wall points after reprojection.
    double se = 0.0;
    long n = 0;
    for (int i = 0; i < 8; ++i) {
        const CameraView& a = batch.views[i];
        const CameraView& b = batch.views[(i + 1) % 8];
        for (int y = 0; y < sz; ++y)
            for (int x = 0; x < sz; ++x) {
                if (a.lateral_mask(x, y) == 0.0)
                    continue;
                const Vec3 p{a.world_pos(x, y, 0), a.world_pos(x, y, 1), a.world_pos(x, y, 2)};
                const auto pr = project_point(p, b.intrinsics, b.pose);
                if (!pr || pr->x < 1 || pr->y < 1 || pr->x > sz - 2 || pr->y > sz - 2)
                    continue;
                const int bx = static_cast<int>(std::lround(pr->x)), by = static_cast<int>(std::lround(pr->y));
                bool inside = true;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        inside = inside && b.lateral_mask(bx + dx, by + dy) == 1.0 &&
                                 std::fabs(b.depth(bx + dx, by + dy) - pr->depth) < 0.5;
                if (!inside)
                    continue;
                const auto s = bilinear_sample(j1[(i + 1) % 8], pr->x, pr->y);
                for (int c = 0; c < 3; ++c) {
                    se += std::pow(j1[i](x, y, c) - s[c], 2);
                    ++n;
                }
            }
    }
    REQUIRE(n > 1000);
    const double psnr = 10.0 * std::log10(1.0 / (se / n));
    MESSAGE("adjacent-view reprojection PSNR " << psnr << " dB over " << n / 3 << " pixels");
    CHECK(psnr >= 30.0);

    // Nothing to inpaint: the input comes back.
    MultiViewBatch clear = batch;
    for (auto& v : clear.views)
        for (double& m : v.lateral_mask.data())
            m = 0.0;
    const auto same = inpaint_views(clear, backend, table, field, opt);
    for (int i = 0; i < 8; ++i)
        CHECK(same[i] == clear.views[i].rgb);

    const sampler::GaussianPriorBackend plain;
    CHECK_THROWS_AS(inpaint_views(batch, plain, table, field, opt), ContractError);
    CHECK_THROWS_AS(inpaint_views(batch, backend, ViewEmbeddingTable(4, 4, 1), field, opt), ContractError);

    sampler::BackendRegistry reg;
    register_multiview_backends(reg);
    CHECK(reg.create_for("facade", sampler::Task::MultiView)->name() == "facade");
}

TEST_CASE("view bundle round trip")
{
    const MultiViewBatch batch = box_batch(48, 3);
    const auto dir = std::filesystem::temp_directory_path() / "strata_test_bundle";
    std::filesystem::remove_all(dir);
    const auto files = write_view_bundle(dir, batch.views);
    CHECK(files.size() == 3 * 3 + 1);
    const auto back = read_view_bundle(dir);
    REQUIRE(back.size() == 3);
    double dmax = 0;
    for (const auto& v : batch.views)
        for (double d : v.depth.data())
            if (std::isfinite(d))
                dmax = std::max(dmax, d);
    for (int i = 0; i < 3; ++i) {
        CHECK(back[i].pose.R.m == batch.views[i].pose.R.m);
        CHECK(back[i].pose.t == batch.views[i].pose.t);
        CHECK(back[i].intrinsics == batch.views[i].intrinsics);
        CHECK(back[i].lateral_mask == batch.views[i].lateral_mask);
        for (std::size_t p = 0; p < back[i].rgb.size(); ++p)
            CHECK(std::fabs(back[i].rgb.data()[p] - batch.views[i].rgb.data()[p]) <= 0.5 / 255 + 1e-12);
        for (std::size_t p = 0; p < back[i].depth.size(); ++p) {
            const double a = back[i].depth.data()[p], b = batch.views[i].depth.data()[p];
            CHECK(std::isfinite(a) == std::isfinite(b));
            if (std::isfinite(a))
                CHECK(std::fabs(a - b) <= 0.5 * dmax / 65535 + 1e-9);
        }
    }
    std::filesystem::remove_all(dir);
}

#include "strata/bake/bake.hpp"
#include "strata/core/errors.hpp"
#include "strata/multiview/rasterize.hpp"
#include "strata/multiview/trajectory.hpp"
#include "strata/scenes/scenes.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

using namespace strata;
using namespace strata::bake;

namespace {

TexturedMesh single_face_mesh(Vec3 a, Vec3 b, Vec3 c)
{
    TexturedMesh m;
    m.vertices = {a, b, c};
    m.faces = {{0, 1, 2}};
    m.face_class = {FaceClass::Horizontal};
    m.uv = {{}};
    m.face_texture = {-1};
    return m;
}

// Wall quad from (x0, y0) to (x1, y1), base 0, height h, facing right of
// the direction of travel.
void add_wall(TexturedMesh& m, Vec2 p, Vec2 q, double h)
{
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    m.vertices.insert(m.vertices.end(), {{p.x, p.y, 0}, {q.x, q.y, 0}, {q.x, q.y, h}, {p.x, p.y, h}});
    m.faces.push_back({base, base + 1, base + 2});
    m.faces.push_back({base, base + 2, base + 3});
    for (int k = 0; k < 2; ++k) {
        m.face_class.push_back(FaceClass::Vertical);
        m.uv.push_back({});
        m.face_texture.push_back(-1);
    }
}

// Smooth texture over wall points: slow enough that two bilinear
// resamplings stay well inside 2/255.
void wall_texture(const Vec3& p, const Vec3&, double* rgb)
{
    rgb[0] = 0.5 + 0.3 * std::sin(0.35 * (p.x + p.y)) * std::cos(0.4 * p.z);
    rgb[1] = 0.45 + 0.25 * std::cos(0.3 * p.x - 0.2 * p.y + 0.3 * p.z);
    rgb[2] = 0.4 + 0.2 * std::sin(0.25 * p.z + 0.1 * p.x);
}

struct BoxFixture {
    scenes::Scene scene = scenes::make_scene("box");
    FacePartition part;
    AtlasLayout layout;
    TexturedMesh textured;
    RasterGrid atlas;
    std::vector<CameraView> views;
    BakeConfig cfg;

    BoxFixture()
    {
        cfg.texel_density = 8.0;
        cfg.atlas_size = 1024;
        part = classify_faces(scene.mesh, cfg.tau);
        layout = pack_atlas(scene.mesh, part.vertical, cfg.texel_density, cfg.atlas_size);
        atlas = paint_atlas(layout, wall_texture);
        textured = attach_atlas(scene.mesh, layout, atlas, &part);
        TexturedMesh block;
        scenes::add_building(block, scene.buildings[0], scenes::kGroundHalf);
        const auto poses = multiview::circular_trajectory(multiview::default_trajectory(block));
        views = multiview::render_views(textured, multiview::fov_intrinsics(256, 256, 60.0), poses);
    }
};

// Distance along the segment camera -> p to the first box or ground hit.
double first_hit(const Vec3& o, const Vec3& p)
{
    const Vec3 d = p - o;
    double best = std::numeric_limits<double>::infinity();
    const double lo[3] = {-10, -10, 0}, hi[3] = {10, 10, 10};
    const double oo[3] = {o.x, o.y, o.z}, dd[3] = {d.x, d.y, d.z};
    for (int axis = 0; axis < 3; ++axis)
        for (double plane : {lo[axis], hi[axis]}) {
            if (dd[axis] == 0.0)
                continue;
            const double t = (plane - oo[axis]) / dd[axis];
            const int a = (axis + 1) % 3, b = (axis + 2) % 3;
            const double u = oo[a] + t * dd[a], w = oo[b] + t * dd[b];
            if (t > 0 && u >= lo[a] && u <= hi[a] && w >= lo[b] && w <= hi[b])
                best = std::min(best, t);
        }
    if (d.z != 0.0) {
        const double t = -o.z / d.z;
        if (t > 0)
            best = std::min(best, t);
    }
    return best * norm(d);
}

} // namespace

TEST_CASE("classify faces")
{
    CHECK(classify_faces(single_face_mesh({0, 0, 0}, {1, 0, 0}, {0, 1, 0}), 0.3).horizontal.size() == 1);
    CHECK(classify_faces(single_face_mesh({0, 0, 0}, {0, 1, 0}, {0, 0, 1}), 0.3).vertical.size() == 1);
    // 45 degree roof: n = (0, -sqrt(1/2), sqrt(1/2)).
    const TexturedMesh roof = single_face_mesh({0, 0, 0}, {1, 0, 0}, {0, 1, 1});
    CHECK(classify_faces(roof, 0.3).horizontal.size() == 1);
    CHECK(classify_faces(roof, 0.8).vertical.size() == 1);
    const FacePartition deg = classify_faces(single_face_mesh({0, 0, 0}, {1, 0, 0}, {2, 0, 0}), 0.3);
    CHECK(deg.degenerate == std::vector<int>{0});
    CHECK(deg.horizontal == std::vector<int>{0});

    const scenes::Scene s = scenes::make_scene("courtyard");
    const FacePartition p = classify_faces(s.mesh, 0.3);
    CHECK(p.vertical.size() + p.horizontal.size() == s.mesh.face_count());
    std::set<int> all(p.vertical.begin(), p.vertical.end());
    all.insert(p.horizontal.begin(), p.horizontal.end());
    CHECK(all.size() == s.mesh.face_count());
    CHECK(p.vertical.size() == 16);
}

TEST_CASE("pack atlas")
{
    TexturedMesh m;
    add_wall(m, {0, 0}, {10, 0}, 3);
    AtlasLayout one = pack_atlas(m, {0, 1}, 4.0, 64);
    REQUIRE(one.charts.size() == 1);
    CHECK(one.charts[0].w == 40);
    CHECK(one.charts[0].h == 12);
    CHECK(one.face_chart == std::vector<int>{0, 0});

    add_wall(m, {20, 5}, {30, 5}, 3);
    const AtlasLayout two = pack_atlas(m, {0, 1, 2, 3}, 4.0, 128);
    REQUIRE(two.charts.size() == 2);
    CHECK(two.charts[0].w == two.charts[1].w);
    CHECK(two.charts[0].h == two.charts[1].h);
    CHECK((two.charts[0].x != two.charts[1].x || two.charts[0].y != two.charts[1].y));

    CHECK(pack_atlas(m, {}, 4.0, 64).charts.empty());

    // No overlaps (gutters included) on a scene with many walls.
    const scenes::Scene s = scenes::make_scene("ring_of_towers");
    const FacePartition p = classify_faces(s.mesh, 0.3);
    const AtlasLayout lay = pack_atlas(s.mesh, p.vertical, 8.0, 1024);
    CHECK(lay.charts.size() == 24);
    for (std::size_t a = 0; a < lay.charts.size(); ++a) {
        const Chart& ca = lay.charts[a];
        CHECK(ca.x >= kGutter);
        CHECK(ca.y >= kGutter);
        CHECK(ca.x + ca.w + kGutter <= lay.size);
        CHECK(ca.y + ca.h + kGutter <= lay.size);
        for (std::size_t b = a + 1; b < lay.charts.size(); ++b) {
            const Chart& cb = lay.charts[b];
            const bool apart = ca.x + ca.w + kGutter <= cb.x || cb.x + cb.w + kGutter <= ca.x ||
                               ca.y + ca.h + kGutter <= cb.y || cb.y + cb.h + kGutter <= ca.y;
            CHECK(apart);
        }
    }

    // Overflow names a size that works.
    try {
        pack_atlas(s.mesh, p.vertical, 8.0, 256);
        FAIL("expected AtlasCapacityError");
    } catch (const AtlasCapacityError& e) {
        CHECK(e.required_size() == 512);
        CHECK_NOTHROW(pack_atlas(s.mesh, p.vertical, 8.0, e.required_size()));
    }
    CHECK_THROWS_AS(pack_atlas(m, {0}, 4.0, 100), ConfigError);
}

TEST_CASE("pinhole projection")
{
    const Intrinsics k{100, 100, 64, 64, 128, 128};
    const CameraPose id{};
    const auto a = project_point({0, 0, 5}, k, id);
    REQUIRE(a);
    CHECK(a->x == 64.0);
    CHECK(a->y == 64.0);
    CHECK(a->depth == 5.0);
    const auto b = project_point({1, 0, 5}, k, id);
    REQUIRE(b);
    CHECK(b->x == doctest::Approx(84.0));
    CHECK(b->y == 64.0);
    CHECK(!project_point({0, 0, -1}, k, id));
}

TEST_CASE("select view")
{
    const scenes::Scene s = scenes::make_scene("box");
    TexturedMesh block;
    scenes::add_building(block, s.buildings[0], scenes::kGroundHalf);
    const auto traj = multiview::default_trajectory(block);
    const auto poses = multiview::circular_trajectory(traj);
    const auto views = multiview::render_views(s.mesh, multiview::fov_intrinsics(128, 128, 60.0), poses);

    // Wall x = 10 faces +x; brute force over the ring's camera directions.
    const Vec3 p{10, 1.5, 4}, n{1, 0, 0};
    const ViewChoice c = select_view(p, n, views, 0.0625);
    int best = -1;
    double best_cos = -2;
    for (int k = 0; k < 8; ++k) {
        const double cv = dot(n, normalized(poses[k].center() - p));
        if (cv > best_cos) {
            best_cos = cv;
            best = k;
        }
    }
    CHECK(c.view == best);
    CHECK(c.view == 0);

    const std::vector<CameraView> single(views.begin(), views.begin() + 1);
    CHECK(select_view(p, n, single, 0.0625).view == 0);
    CHECK(select_view(p, n, std::span<const CameraView>{}, 0.0625).view == -1);

    // Foot of an inner courtyard wall: every line of sight crosses the far wall.
    const scenes::Scene cy = scenes::make_scene("courtyard");
    TexturedMesh cb;
    scenes::add_building(cb, cy.buildings[0], scenes::kGroundHalf);
    const auto cviews = multiview::render_views(
        cy.mesh, multiview::fov_intrinsics(128, 128, 60.0),
        multiview::circular_trajectory(multiview::default_trajectory(cb)));
    CHECK(select_view({10, 0, 0.2}, {-1, 0, 0}, cviews, 0.0625).view == -1);
    // The outer face of the same building is visible.
    CHECK(select_view({20, 0, 5}, {1, 0, 0}, cviews, 0.0625).view == 0);
}

TEST_CASE("bake: pre-textured box round trip")
{
    const BoxFixture fx;
    const BakeResult r = bake::bake(fx.scene.mesh, fx.views, {}, fx.cfg);
    CHECK(r.layout.charts.size() == 4);
    CHECK(r.unseen == 0);
    CHECK(r.baked == 4 * 160 * 80);
    const double eps = fx.cfg.effective_depth_epsilon();

    double max_err = 0.0;
    std::size_t clean = 0;
    for (const TexelRecord& t : r.texels) {
        REQUIRE(t.status == TexelStatus::Baked);
        // Most-perpendicular optimality against brute force over K_vis.
        for (std::size_t k = 0; k < fx.views.size(); ++k) {
            const auto pr = project_point(t.p, fx.views[k].intrinsics, fx.views[k].pose);
            if (!pr || pr->x < 0 || pr->y < 0 || pr->x > 255 || pr->y > 255)
                continue;
            if (pr->depth > fx.views[k].depth(std::lround(pr->x), std::lround(pr->y)) + eps)
                continue;
            CHECK(t.choice.cosine >= dot(t.n, normalized(fx.views[k].pose.center() - t.p)));
        }
        // Visibility soundness against the analytic box.
        const Vec3 cam = fx.views[t.choice.view].pose.center();
        CHECK(first_hit(cam, t.p) >= norm(t.p - cam) - eps);

        // Texel error where the bilinear footprint stays on the wall.
        const CameraView& v = fx.views[t.choice.view];
        const int x0 = static_cast<int>(std::floor(t.choice.x)), y0 = static_cast<int>(std::floor(t.choice.y));
        bool same = true;
        for (int dy = -1; dy <= 2; ++dy)
            for (int dx = -1; dx <= 2; ++dx) {
                const int x = std::clamp(x0 + dx, 0, 255), y = std::clamp(y0 + dy, 0, 255);
                const int f = v.face_id[y * 256 + x];
                same = same && f >= 0 && r.layout.face_chart[f] == t.chart;
            }
        if (!same)
            continue;
        ++clean;
        for (int c = 0; c < 3; ++c)
            max_err = std::max(max_err, std::fabs(r.atlas(t.atlas_x, t.atlas_y, c) - fx.atlas(t.atlas_x, t.atlas_y, c)));
    }
    MESSAGE("round trip: " << clean << " interior texels, max error " << max_err * 255 << "/255");
    CHECK(clean > r.baked * 8 / 10);
    CHECK(max_err <= 2.0 / 255.0);

    // Horizontal faces keep their page-0 texture.
    for (int f : r.partition.horizontal)
        CHECK(r.mesh.face_texture[f] == fx.scene.mesh.face_texture[f]);
    for (int f : r.partition.vertical)
        CHECK(r.mesh.face_texture[f] == 1);

    // Mask correctness on every rendered pixel.
    const std::set<int> vert(r.partition.vertical.begin(), r.partition.vertical.end());
    for (const auto& v : fx.views)
        for (int y = 0; y < 256; ++y)
            for (int x = 0; x < 256; ++x) {
                const int f = v.face_id[y * 256 + x];
                CHECK((v.lateral_mask(x, y) == 1.0) == (f >= 0 && vert.count(f) == 1));
            }
}

TEST_CASE("bake: re-render consistency")
{
    const BoxFixture fx;
    std::vector<RasterGrid> sources;
    for (const auto& v : fx.views)
        sources.push_back(v.rgb);
    const BakeResult r = bake::bake(fx.scene.mesh, fx.views, sources, fx.cfg);
    std::vector<CameraPose> poses;
    for (const auto& v : fx.views)
        poses.push_back(v.pose);
    const auto again = multiview::render_views(r.mesh, fx.views[0].intrinsics, poses);
    const Consistency c = reprojection_consistency(sources, again);
    MESSAGE("re-render PSNR " << c.psnr << " dB, SSIM " << c.ssim);
    CHECK(c.psnr >= 30.0);
    CHECK(c.ssim >= 0.95);

    auto corrupted = sources;
    for (double& v : corrupted[3].data())
        v = 1.0 - v;
    const BakeResult rc = bake::bake(fx.scene.mesh, fx.views, corrupted, fx.cfg);
    const Consistency cc =
        reprojection_consistency(corrupted, multiview::render_views(rc.mesh, fx.views[0].intrinsics, poses));
    CHECK(cc.psnr < c.psnr);
    CHECK(cc.ssim < c.ssim);

    CHECK_THROWS_AS(reprojection_consistency(sources, std::span<const CameraView>(again.data(), 2)), MetricError);
}

TEST_CASE("bake: degenerate configurations")
{
    const BoxFixture fx;
    // Zero views: everything unseen, mesh still valid.
    const BakeResult none = bake::bake(fx.scene.mesh, {}, {}, fx.cfg);
    CHECK(none.baked == 0);
    CHECK(none.unseen == 4 * 160 * 80);
    CHECK(none.unseen_fraction() == 1.0);
    none.mesh.validate();
    CHECK(none.atlas(none.layout.charts[0].x, none.layout.charts[0].y, 0) == 0.5);

    // tau close to 1 on a scene tilted by one degree (no face is exactly
    // level): every face is charted and re-rendering stays close.
    TexturedMesh tilted = fx.textured;
    const double a = std::numbers::pi / 180.0;
    for (Vec3& v : tilted.vertices)
        v = {v.x, std::cos(a) * v.y - std::sin(a) * v.z, std::sin(a) * v.y + std::cos(a) * v.z};
    BakeConfig all = fx.cfg;
    all.tau = 1.0 - 1e-9;
    all.texel_density = 4.0;
    all.atlas_size = 1024;
    std::vector<CameraPose> poses;
    for (const auto& v : fx.views)
        poses.push_back(v.pose);
    const auto src = multiview::render_views(tilted, fx.views[0].intrinsics, poses);
    const BakeResult r = bake::bake(tilted, src, {}, all);
    CHECK(r.partition.horizontal.empty());
    CHECK(r.partition.vertical.size() == tilted.face_count());
    const auto again = multiview::render_views(r.mesh, fx.views[0].intrinsics, poses);
    double se = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < again.size(); ++k)
        for (int y = 0; y < 256; ++y)
            for (int x = 0; x < 256; ++x)
                if (src[k].face_id[y * 256 + x] >= 0)
                    for (int c = 0; c < 3; ++c) {
                        se += std::pow(again[k].rgb(x, y, c) - src[k].rgb(x, y, c), 2);
                        ++n;
                    }
    const double psnr = 10 * std::log10(n / se);
    MESSAGE("all-vertical re-render PSNR " << psnr << " dB");
    CHECK(psnr >= 30.0);

    BakeConfig bad;
    bad.tau = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.atlas_size = 1000;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bake: atlas files")
{
    const BoxFixture fx;
    const BakeResult r = bake::bake(fx.scene.mesh, fx.views, {}, fx.cfg);
    const auto dir = std::filesystem::temp_directory_path() / "strata_test_bake";
    const auto files = write_atlas(dir, r);
    REQUIRE(files.size() == 2);
    CHECK(std::filesystem::exists(files[0]));
    std::ifstream in(files[1]);
    const auto j = nlohmann::json::parse(in);
    CHECK(j["charts"].size() == 4);
    CHECK(j["charts"][0]["uvRect"].size() == 4);
    std::filesystem::remove_all(dir);
}

#include "strata/core/errors.hpp"
#include "strata/lift/height.hpp"
#include "strata/lift/mesh_build.hpp"
#include "strata/sampler/backend.hpp"
#include "strata/sampler/backends.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

using namespace strata;
using namespace strata::lift;

namespace {

HeightMap map_of(int w, int h, std::initializer_list<double> v)
{
    RasterGrid r(w, h, 1);
    std::copy(v.begin(), v.end(), r.data().begin());
    return HeightMap::from_meters(r);
}

RasterGrid ortho_for(const HeightMap& h)
{
    return RasterGrid(h.raster.width(), h.raster.height(), 3, h.raster.gsd(), h.raster.anchor(), 0.5);
}

RasterGrid scene(int n, std::uint64_t seed)
{
    // Bright rectangles (roofs) on a darker textured ground.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    RasterGrid r(n, n, 3, 1.0, {0.0, 0.0});
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 3; ++c)
                r(x, y, c) = 0.3 + 0.05 * u(rng);
    for (int k = 0; k < n / 8; ++k) {
        const int x0 = static_cast<int>(u(rng) * (n - 12)), y0 = static_cast<int>(u(rng) * (n - 12));
        for (int y = y0; y < y0 + 10; ++y)
            for (int x = x0; x < x0 + 8; ++x)
                for (int c = 0; c < 3; ++c)
                    r(x, y, c) = 0.85;
    }
    return r;
}

} // namespace

TEST_CASE("height quantization")
{
    RasterGrid one(1, 1, 1, 1.0, {}, 128.0);
    CHECK(quantize_height(one, {0, 255}).data[0] == 128);
    one(0, 0) = 50.0;
    CHECK(quantize_height(one, {0, 100}).data[0] == 128);
    one(0, 0) = -4.0;
    CHECK(quantize_height(one, {0, 100}).data[0] == 0);
    CHECK_THROWS_AS(quantize_height(one, {5, 5}), QuantizationError);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const double lo = u(rng) * 20.0, span = 0.5 + u(rng) * 200.0;
        const HeightRange range{lo, lo + span};
        RasterGrid h(7, 5, 1);
        for (double& v : h.data())
            v = lo + u(rng) * span;
        const RasterGrid back = dequantize_height(quantize_height(h, range), range);
        double worst = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i)
            worst = std::max(worst, std::fabs(back.data()[i] - h.data()[i]));
        CHECK(worst <= span / 510.0 + 1e-9);
    }
}

TEST_CASE("height map ingest and files")
{
    RasterGrid r(3, 2, 1, 2.0, {10, 20});
    r(1, 1) = -3.0;
    r(2, 0) = 12.5;
    const HeightMap h = HeightMap::from_meters(r);
    CHECK(h.raster(1, 1) == 0.0);
    CHECK(h.valid_range.max_m == 12.5);
    r(0, 0) = std::nan("");
    CHECK_THROWS_AS(HeightMap::from_meters(r), DomainError);

    const auto path = std::filesystem::temp_directory_path() / "strata_test_lift" / "h.png";
    write_height(path, h);
    const HeightMap back = read_height(path);
    CHECK(back.raster.gsd() == 2.0);
    CHECK(back.raster.anchor() == h.raster.anchor());
    for (std::size_t i = 0; i < h.raster.size(); ++i)
        CHECK(std::fabs(back.raster.data()[i] - h.raster.data()[i]) <= 12.5 / 510 + 1e-9);
    std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("flat 2x2 mesh")
{
    const HeightMap h = map_of(2, 2, {0, 0, 0, 0});
    const TexturedMesh m = height_to_mesh(h, ortho_for(h));
    CHECK(m.vertices.size() == 4);
    REQUIRE(m.faces.size() == 2);
    for (const Face& f : m.faces) {
        const Vec3 n = face_normal(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
        CHECK(n == Vec3{0, 0, 1});
    }
    CHECK_NOTHROW(m.validate());
}

TEST_CASE("3x3 spike mesh matches an exhaustive oracle")
{
    const HeightMap h = map_of(3, 3, {0, 0, 0, 0, 10, 0, 0, 0, 0});
    const TexturedMesh m = height_to_mesh(h, ortho_for(h));
    REQUIRE(m.vertices.size() == 9);
    REQUIRE(m.faces.size() == 8);

    // Oracle: every cell splits along its (i+1, j)-(i, j+1) diagonal.
    std::set<std::array<std::uint32_t, 3>> want, got;
    auto sorted = [](std::array<std::uint32_t, 3> a) {
        std::sort(a.begin(), a.end());
        return a;
    };
    for (std::uint32_t j = 0; j < 2; ++j)
        for (std::uint32_t i = 0; i < 2; ++i) {
            const std::uint32_t a = j * 3 + i, b = a + 1, c = a + 3, d = a + 4;
            want.insert(sorted({a, b, c}));
            want.insert(sorted({b, c, d}));
        }
    for (const Face& f : m.faces)
        got.insert(sorted(f));
    CHECK(got == want);

    int walls = 0;
    for (std::size_t k = 0; k < m.faces.size(); ++k) {
        const Face& f = m.faces[k];
        const bool has_spike = f[0] == 4 || f[1] == 4 || f[2] == 4;
        CHECK((m.face_class[k] == FaceClass::Vertical) == has_spike);
        walls += has_spike;
        const Vec3 n = face_normal(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
        CHECK(n.z > 0.0);
        if (has_spike)
            CHECK(n.z < 0.15);
    }
    CHECK(walls == 6);
    // Hand-derived: face (v1, v3, v4) has normal (-10, 10, 1) / sqrt(201).
    const auto it = std::find(m.faces.begin(), m.faces.end(), Face{1, 3, 4});
    REQUIRE(it != m.faces.end());
    const Vec3 n = face_normal(m.vertices[1], m.vertices[3], m.vertices[4]);
    CHECK(n.x == doctest::Approx(-10.0 / std::sqrt(201.0)));
    CHECK(n.y == doctest::Approx(10.0 / std::sqrt(201.0)));
    CHECK(n.z == doctest::Approx(1.0 / std::sqrt(201.0)));
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i)
            CHECK(m.vertices[j * 3 + i].z == h.raster(i, j));
}

TEST_CASE("grid mesh is watertight and spans the raster")
{
    RasterGrid r(9, 6, 1, 2.0, {100.0, 50.0});
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 12);
    for (double& v : r.data())
        v = u(rng);
    const HeightMap h = HeightMap::from_meters(r);
    const TexturedMesh m = height_to_mesh(h, ortho_for(h));
    CHECK(m.faces.size() == 2u * 8 * 5);
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
    for (const Face& f : m.faces)
        for (int k = 0; k < 3; ++k) {
            auto e = std::minmax(f[k], f[(k + 1) % 3]);
            ++edges[{e.first, e.second}];
        }
    for (const auto& [e, count] : edges) {
        const int ia = e.first % 9, ja = e.first / 9, ib = e.second % 9, jb = e.second / 9;
        const bool boundary = (ja == jb && (ja == 0 || ja == 5)) || (ia == ib && (ia == 0 || ia == 8));
        CHECK(count == (boundary ? 1 : 2));
    }
    const auto box = bounding_box(m);
    CHECK(box[1].x - box[0].x == doctest::Approx(8 * 2.0));
    CHECK(box[1].y - box[0].y == doctest::Approx(5 * 2.0));
    CHECK_THROWS_AS(height_to_mesh(h, RasterGrid(9, 5, 3, 2.0, {100.0, 50.0})), ContractError);
}

TEST_CASE("procedural height backend")
{
    ProceduralHeightBackend b;
    const sampler::BlockDctCodec codec(4);
    const tiler::NoiseField field(5);
    HeightOptions opt;
    opt.steps = sampler::make_step_list(opt.schedule.T, 10);

    SUBCASE("constant colour gives smooth ground inside the envelope")
    {
        const RasterGrid flat(64, 64, 3, 1.0, {}, 0.4);
        const HeightMap h = infer_height(flat, b, codec, {}, field, opt);
        CHECK(h.raster.gsd() == 1.0);
        double worst = 0.0, lo = 1e9, hi = -1e9;
        for (int y = 0; y < 64; ++y)
            for (int x = 1; x < 64; ++x)
                worst = std::max(worst, std::fabs(h.raster(x, y) - h.raster(x - 1, y)));
        for (double v : h.raster.data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo >= 0.0);
        CHECK(hi <= b.params().envelope_m);
        CHECK(hi < b.params().building_m);
        CHECK(worst < 3.0);
    }
    SUBCASE("bright roofs rise above the ground")
    {
        const RasterGrid img = scene(64, 2);
        const HeightMap h = infer_height(img, b, codec, {}, field, opt);
        double roof = 0.0, ground = 0.0;
        int nr = 0, ng = 0;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                if (img(x, y, 0) > 0.8) {
                    roof += h.raster(x, y);
                    ++nr;
                } else {
                    ground += h.raster(x, y);
                    ++ng;
                }
            }
        REQUIRE(nr > 0);
        CHECK(roof / nr > ground / ng + 5.0);
    }
    SUBCASE("sub-extent interior is bit-identical")
    {
        const RasterGrid img = scene(96, 3);
        const HeightMap big = infer_height(img, b, codec, {}, field, opt);
        const HeightMap sub = infer_height(img.crop(0, 0, 64, 64), b, codec, {}, field, opt);
        // Pixels owned by the shared top-left window come from identical runs.
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 48; ++x)
                CHECK(sub.raster(x, y) == big.raster(x, y));
    }
    SUBCASE("contracts")
    {
        sampler::FractalRefinerBackend wrong;
        CHECK_THROWS_AS(infer_height(scene(64, 1), wrong, codec, {}, field, opt), RegistryError);
        CHECK_THROWS_AS(infer_height(scene(64, 1), b, codec, {""}, field, opt), ContractError);
        RasterGrid shifted = scene(64, 1);
        shifted.set_georef(1.0, {2.0, 0.0});
        CHECK_THROWS_AS(infer_height(shifted, b, codec, {}, field, opt), ContractError);
    }
    CHECK(std::string(kDefaultHeightPrompt) == "predict the heights of prominent features");
    sampler::BackendRegistry reg;
    register_lift_backends(reg);
    CHECK(reg.create_for("procedural_height", sampler::Task::Height)->receptive_radius() == 3);
}

TEST_CASE("height backend honours its latent receptive radius")
{
    ProceduralHeightBackend b;
    const sampler::BlockDctCodec codec(4);
    const auto s = sampler::linear_schedule();
    sampler::ConditionSet c;
    c.prompt = kDefaultHeightPrompt;
    c.origin = {-3, 5};
    c.planes["ortho"] = codec.encode(scene(64, 4));
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0, 1);
    RasterGrid wn(16, 16, 16), x(16, 16, 16);
    for (double& v : wn.data())
        v = n(rng);
    for (double& v : x.data())
        v = n(rng);
    c.planes["world_noise"] = wn;
    const int qx = 8, qy = 7, r = b.receptive_radius();
    auto at_q = [&](const sampler::ConditionSet& cond, const RasterGrid& state) {
        const RasterGrid e = b.predict_noise(state, 20, s, b.prepare(cond));
        std::vector<double> v;
        for (int k = 0; k < 16; ++k)
            v.push_back(e(qx, qy, k));
        return v;
    };
    const auto base = at_q(c, x);
    std::uniform_int_distribution<int> pick(0, 15);
    for (int trial = 0; trial < 150; ++trial) {
        const int px = pick(rng), py = pick(rng), k = pick(rng), which = trial % 3;
        if (std::max(std::abs(px - qx), std::abs(py - qy)) <= r)
            continue;
        sampler::ConditionSet c2 = c;
        RasterGrid x2 = x;
        RasterGrid& t = which == 0 ? x2 : c2.planes[which == 1 ? "ortho" : "world_noise"];
        t(px, py, which == 1 ? k % 3 : k) += 0.3;
        CHECK(at_q(c2, x2) == base);
    }
}

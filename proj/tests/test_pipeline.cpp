#include "strata/core/errors.hpp"
#include "strata/core/parallel.hpp"
#include "strata/io/files.hpp"
#include "strata/pipeline/exchange.hpp"
#include "strata/pipeline/pipeline.hpp"
#include "strata/scenes/scenes.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace strata;
using namespace strata::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("strata_test_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

TexturedMesh quad()
{
    TexturedMesh m;
    m.vertices = {{0, 0, 0}, {2, 0, 0}, {2, 3, 0.5}, {0, 3, 0.5}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    m.uv = {{{{0, 1}, {1, 1}, {1, 0}}}, {{{0, 1}, {1, 0}, {0, 0}}}};
    m.face_texture = {0, 0};
    m.face_class = {FaceClass::Horizontal, FaceClass::Horizontal};
    RasterGrid tex(4, 4, 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            tex(x, y, 0) = (x + y) / 6.0;
    m.textures.push_back(tex);
    return m;
}

int count_prefix(const std::string& text, const std::string& prefix)
{
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        n += line.rfind(prefix, 0) == 0;
    return n;
}

// Rebuilds a GLB around an edited JSON chunk.
std::vector<std::uint8_t> repack(const std::vector<std::uint8_t>& glb, const std::function<void(json&)>& edit)
{
    auto u32 = [&](std::size_t at) {
        return std::uint32_t(glb[at]) | std::uint32_t(glb[at + 1]) << 8 | std::uint32_t(glb[at + 2]) << 16 |
               std::uint32_t(glb[at + 3]) << 24;
    };
    const std::uint32_t jlen = u32(12);
    json doc = json::parse(glb.begin() + 20, glb.begin() + 20 + jlen);
    edit(doc);
    std::string text = doc.dump();
    while (text.size() % 4)
        text.push_back(' ');
    const std::vector<std::uint8_t> bin(glb.begin() + 20 + jlen, glb.end()); // header + payload
    std::vector<std::uint8_t> out;
    auto put = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            out.push_back(std::uint8_t(v >> (8 * i)));
    };
    put(0x46546C67);
    put(2);
    put(static_cast<std::uint32_t>(20 + text.size() + bin.size()));
    put(static_cast<std::uint32_t>(text.size()));
    put(0x4E4F534A);
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), bin.begin(), bin.end());
    return out;
}

PipelineConfig small_config()
{
    PipelineConfig c;
    c.seed = 11;
    c.anchor.size = 16;
    c.steps = 6;
    c.focus_size = 96;
    c.image_size = 64;
    return c;
}

std::map<std::string, std::string> stage_hashes(const RunResult& r)
{
    std::map<std::string, std::string> m;
    for (const auto& s : r.stages)
        m[s.name] = s.status + ":" + s.hash;
    return m;
}

int run_cli(const std::string& args)
{
    const int rc = std::system((std::string(STRATA_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("obj export of a quad")
{
    const fs::path dir = scratch("obj");
    const TexturedMesh m = quad();
    const auto paths = write_obj(dir, "quad", m);
    CHECK(paths.size() == 3);
    const std::string text = io::read_text(dir / "quad.obj");
    CHECK(count_prefix(text, "v ") == 4);
    CHECK(count_prefix(text, "f ") == 2);
    CHECK(text.find("+Z up") != std::string::npos);

    const TexturedMesh back = read_obj(dir / "quad.obj");
    REQUIRE(back.vertices.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back.vertices[i].x == m.vertices[i].x);
        CHECK(back.vertices[i].y == m.vertices[i].y);
        CHECK(back.vertices[i].z == m.vertices[i].z);
    }
    CHECK(back.faces == m.faces);
    CHECK(back.face_texture == m.face_texture);
    for (std::size_t f = 0; f < 2; ++f)
        for (int c = 0; c < 3; ++c) {
            CHECK(back.uv[f][c].x == m.uv[f][c].x);
            CHECK(back.uv[f][c].y == m.uv[f][c].y);
        }
    REQUIRE(back.textures.size() == 1);
    CHECK(std::fabs(back.textures[0](3, 3, 0) - 1.0) < 1e-12);
    CHECK_THROWS_AS(export_mesh(m, "fbx", dir, "quad"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("glb export of the box scene validates and round-trips")
{
    const scenes::Scene s = scenes::make_scene("box");
    const auto bytes = encode_glb(s.mesh);
    CHECK(validate_glb(bytes).empty());

    const TexturedMesh back = decode_glb(bytes);
    const auto order = export_face_order(s.mesh);
    REQUIRE(back.faces.size() == order.size());
    double worst = 0.0, worst_uv = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const std::size_t f = order[k];
        CHECK(back.face_texture[k] == s.mesh.face_texture[f]);
        for (int c = 0; c < 3; ++c) {
            const Vec3 a = s.mesh.vertices[s.mesh.faces[f][c]], b = back.vertices[back.faces[k][c]];
            worst = std::max({worst, std::fabs(a.x - b.x), std::fabs(a.y - b.y), std::fabs(a.z - b.z)});
            if (s.mesh.face_texture[f] >= 0)
                worst_uv = std::max({worst_uv, std::fabs(s.mesh.uv[f][c].x - back.uv[k][c].x),
                                     std::fabs(s.mesh.uv[f][c].y - back.uv[k][c].y)});
        }
    }
    CHECK(worst <= 1e-5);
    CHECK(worst_uv <= 1e-7);
    CHECK(back.textures.size() == s.mesh.textures.size());

    // Header and structure violations are reported.
    auto bad = bytes;
    bad[4] = 1;
    CHECK(!validate_glb(bad).empty());
    bad = bytes;
    bad.pop_back();
    CHECK(!validate_glb(bad).empty());
    CHECK(!validate_glb(repack(bytes, [](json& d) { d["asset"]["version"] = "1.0"; })).empty());
    CHECK(!validate_glb(repack(bytes, [](json& d) { d["accessors"][0]["count"] = 1000000; })).empty());
    CHECK(!validate_glb(repack(bytes, [](json& d) { d["meshes"][0]["primitives"][0]["material"] = 99; })).empty());
    CHECK(!validate_glb(repack(bytes, [](json& d) { d["nodes"][0]["rotation"] = {0, 0, 0, 2}; })).empty());
    CHECK(!validate_glb(repack(bytes, [](json& d) { d["accessors"][0].erase("min"); })).empty());
    CHECK(!validate_glb(repack(bytes, [](json& d) { d["accessors"][0]["max"][0] = -1e9; })).empty());
    CHECK(validate_glb(repack(bytes, [](json&) {})).empty());
}

TEST_CASE("config parsing and validation")
{
    const auto reg = default_registry();
    CHECK_THROWS_AS(PipelineConfig::from_json({{"sed", 1}}), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"seed", "x"}}), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"stages", {{"paint", false}}}}), ConfigError);
    PipelineConfig c = PipelineConfig::from_json(json::object());
    CHECK_THROWS_AS(c.validate(reg), ConfigError); // no seed
    c.seed = 4;
    c.validate(reg);
    PipelineConfig bad = c;
    bad.refine_backend = "facade";
    CHECK_THROWS_AS(bad.validate(reg), ConfigError);
    bad = c;
    bad.height_backend = "nope";
    CHECK_THROWS_AS(bad.validate(reg), ConfigError);
    bad = c;
    bad.ladder.levels = {64, 10};
    CHECK_THROWS_AS(bad.validate(reg), ConfigError);
    bad = c;
    bad.anchor.terrain = "moon";
    CHECK_THROWS_AS(bad.validate(reg), ConfigError);

    c.stages["bake"] = false;
    c.bake.tau = 0.4;
    const PipelineConfig again = PipelineConfig::from_json(c.to_json());
    CHECK(again.to_json() == c.to_json());
    CHECK(!again.enabled("bake"));
    CHECK(again.enabled("qa"));
}

TEST_CASE("pipeline determinism, toggles, isolation and failure")
{
    const PipelineConfig c = small_config();
    const fs::path a = scratch("a"), b = scratch("b"), t = scratch("threads");
    const RunResult ra = run_pipeline(c, a);
    REQUIRE(ra.ok);
    for (const auto& s : ra.stages)
        CHECK(s.status == "done");
    const RunResult rb = run_pipeline(c, b);
    CHECK(stage_hashes(ra) == stage_hashes(rb));
    PipelineConfig ct = c;
    ct.threads = 1;
    CHECK(stage_hashes(run_pipeline(ct, t)) == stage_hashes(ra));
    parallel::set_max_threads(0);

    const json manifest = json::parse(io::read_text(a / "manifest.json"));
    REQUIRE(manifest["stages"].size() == kStages.size());
    CHECK(manifest["stages"][5]["name"] == "bake");
    CHECK(!manifest["stages"][5]["outputs"].empty());
    CHECK(fs::exists(a / "qa/qa.jsonl"));
    CHECK(validate_glb(io::read_bytes(a / "bake/scene.glb")).empty());

    // Rerunning one stage from cached upstream reproduces the full-run artifact.
    for (const char* stage : {"inpaint", "bake", "qa"}) {
        const RunResult r = run_pipeline(c, b, std::string(stage));
        CHECK(stage_hashes(r) == stage_hashes(ra));
    }

    // bake off: the bundle ends at the inpainted views.
    PipelineConfig off = c;
    off.stages["bake"] = false;
    const fs::path o = scratch("off");
    const RunResult ro = run_pipeline(off, o);
    CHECK(ro.ok);
    const auto h = stage_hashes(ro);
    CHECK(h.at("inpaint").rfind("done", 0) == 0);
    CHECK(h.at("bake") == "skipped:");
    CHECK(h.at("metrics") == "skipped:");
    CHECK(h.at("qa") == "skipped:");
    CHECK(fs::exists(o / "inpaint/view_0_rgb.png"));
    CHECK(!fs::exists(o / "bake"));

    // Failure: an atlas far too small; manifest records it and skips the rest.
    PipelineConfig tiny = c;
    tiny.bake.atlas_size = 16;
    const fs::path f = scratch("fail");
    const RunResult rf = run_pipeline(tiny, f);
    CHECK(!rf.ok);
    const json fm = json::parse(io::read_text(f / "manifest.json"));
    CHECK(fm["stages"][5]["status"] == "failed");
    CHECK(fm["stages"][5]["error"].get<std::string>().find("atlas") != std::string::npos);
    CHECK(fm["stages"][6]["status"] == "skipped");

    for (const auto& p : {a, b, t, o, f})
        fs::remove_all(p);
}

TEST_CASE("cli exit codes")
{
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const fs::path cfg = dir / "c.json";
    io::write_text(cfg, R"({"anchor": {"size": 16}, "steps": 4, "focus_size": 64, "trajectory": {"image_size": 64}})");
    const std::string common = "--config " + cfg.string() + " --out " + (dir / "out").string();
    CHECK(run_cli(common + " pipeline") == 2); // no seed
    CHECK(run_cli(common + " --seed 2 pipeline") == 0);
    CHECK(run_cli(common + " --seed 2 --stage metrics pipeline") == 0);
    CHECK(run_cli(common + " --seed 2 export --format obj") == 0);
    CHECK(fs::exists(dir / "out/export/scene.obj"));
    CHECK(run_cli(common + " --seed 2 export --format glb") == 0);
    CHECK(run_cli("validate " + (dir / "out/export/scene.glb").string()) == 0);
    CHECK(run_cli(common + " --seed 2 export --format stl") == 2);
    CHECK(run_cli("--seed 2 --config " + cfg.string() + " --out " + (dir / "q").string() + " bake") == 3);

    io::write_text(dir / "bad.json", R"({"seed": 1, "colour": 3})");
    CHECK(run_cli("--config " + (dir / "bad.json").string() + " pipeline") == 2);
    io::write_text(dir / "tiny.json", R"({"seed": 1, "anchor": {"size": 16}, "steps": 4, "focus_size": 64,
        "trajectory": {"image_size": 64}, "bake": {"atlas_size": 16}})");
    CHECK(run_cli("--config " + (dir / "tiny.json").string() + " --out " + (dir / "t").string() + " pipeline") == 3);
    fs::remove_all(dir);
}

#include "strata/pipeline/pipeline.hpp"

#include "strata/core/errors.hpp"
#include "strata/core/parallel.hpp"
#include "strata/io/files.hpp"
#include "strata/io/png.hpp"
#include "strata/lift/height.hpp"
#include "strata/lift/mesh_build.hpp"
#include "strata/metrics/metrics.hpp"
#include "strata/multiview/attention.hpp"
#include "strata/multiview/bundle.hpp"
#include "strata/multiview/inpaint.hpp"
#include "strata/multiview/rasterize.hpp"
#include "strata/multiview/trajectory.hpp"
#include "strata/pipeline/exchange.hpp"
#include "strata/qa/qa.hpp"
#include "strata/sampler/backends.hpp"
#include "strata/sampler/codec.hpp"
#include "strata/tiler/noise_field.hpp"
#include "strata/tiler/plan.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

namespace strata::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kEmbeddingWidth = 8;
const io::Quantization kUnit8{8, 0.0, 1.0};

// Everything downstream of a stage, including itself.
bool depends_on(const std::string& stage, const std::string& upstream)
{
    const auto a = std::find(kStages.begin(), kStages.end(), upstream);
    const auto b = std::find(kStages.begin(), kStages.end(), stage);
    return a <= b;
}

std::string level_name(int i) { return "cascade/level_" + std::to_string(i) + ".png"; }
std::string view_image(int i) { return "inpaint/view_" + std::to_string(i) + "_rgb.png"; }

FileHash hash_file(const fs::path& root, const fs::path& p)
{
    return {fs::relative(p, root).generic_string(), io::sha256_file(p)};
}

std::vector<FileHash> hash_files(const fs::path& root, std::vector<fs::path> paths)
{
    std::sort(paths.begin(), paths.end());
    paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
    std::vector<FileHash> out;
    for (const auto& p : paths)
        out.push_back(hash_file(root, p));
    return out;
}

std::string combined_hash(const std::vector<FileHash>& files)
{
    std::string s;
    for (const auto& f : files)
        s += f.path + '\n' + f.sha256 + '\n';
    return io::sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

// Finest-level block handed to lift: centered, edges on multiples of 4.
struct Focus {
    int x0 = 0, y0 = 0, size = 0;
};

Focus focus_block(const PipelineConfig& c)
{
    const double fine = c.ladder.levels.back() / c.ladder.levels.front();
    const long extent = std::lround(c.anchor.size / fine);
    Focus f;
    f.size = static_cast<int>(std::min<long>(c.focus_size, extent) / 4 * 4);
    f.x0 = f.y0 = static_cast<int>((extent - f.size) / 2 / 4 * 4);
    return f;
}

std::unique_ptr<sampler::DenoiserBackend> make_backend(const PipelineConfig& c, const std::string& slot,
                                                       const std::string& name, sampler::Task task)
{
    return default_registry().create_for(name, task, c.backend_params.value(slot, json::object()));
}

TexturedMesh lifted_mesh(const fs::path& out)
{
    return lift::height_to_mesh(lift::read_height(out / "lift/height.png"), io::read_raster(out / "cascade/focus.png"));
}

struct Cameras {
    std::vector<Intrinsics> k;
    std::vector<CameraPose> poses;
};

Cameras read_cameras(const fs::path& out)
{
    Cameras c;
    for (const auto& v : multiview::read_view_bundle(out / "render")) {
        c.k.push_back(v.intrinsics);
        c.poses.push_back(v.pose);
    }
    return c;
}

std::vector<CameraView> rerender(const TexturedMesh& mesh, const Cameras& cams)
{
    std::vector<CameraView> views;
    for (std::size_t i = 0; i < cams.poses.size(); ++i)
        views.push_back(multiview::rasterize(mesh, cams.k[i], cams.poses[i], static_cast<int>(i)));
    return views;
}

std::vector<RasterGrid> read_images(const fs::path& out, int n)
{
    std::vector<RasterGrid> images;
    for (int i = 0; i < n; ++i)
        images.push_back(io::dequantize_raster(io::read_png(out / view_image(i)), kUnit8, 1.0, {}));
    return images;
}

// ---------------------------------------------------------------------------
// Stages. Each returns (inputs, outputs) as absolute paths.

using Paths = std::vector<fs::path>;
struct StageIO {
    Paths inputs, outputs;
};

StageIO stage_anchor(const PipelineConfig& c, const fs::path& out)
{
    cascade::AnchorSpec spec = c.anchor;
    spec.seed = *c.seed;
    const RasterGrid a = cascade::procedural_anchor(spec, c.ladder.levels.front());
    io::write_raster(out / level_name(0), a, kUnit8);
    return {{}, {out / level_name(0), out / (level_name(0) + ".json")}};
}

StageIO stage_cascade(const PipelineConfig& c, const fs::path& out)
{
    const RasterGrid anchor = io::read_raster(out / level_name(0));
    const auto backend = make_backend(c, "refine", c.refine_backend, sampler::Task::Refine);
    cascade::CascadeOptions opt;
    opt.steps = sampler::make_step_list(opt.schedule.T, c.steps);
    opt.quantize_levels = true; // downstream reads 8-bit PNGs

    const int last = static_cast<int>(c.ladder.levels.size()) - 1;
    const Focus f = focus_block(c);
    const double fine_gsd = c.ladder.levels.back();
    RasterGrid focus(f.size, f.size, 3, fine_gsd, {anchor.anchor().x + f.x0 * fine_gsd,
                                                   anchor.anchor().y - f.y0 * fine_gsd});
    std::map<int, std::vector<json>> tiles; // streamed-only levels
    std::mutex mu;
    auto observer = [&](int level, int x0, int y0, const RasterGrid& tile) {
        const io::PngImage q = io::quantize_raster(tile, kUnit8);
        std::vector<std::uint8_t> bytes(q.samples.begin(), q.samples.end());
        std::lock_guard lock(mu);
        tiles[level].push_back({{"x0", x0}, {"y0", y0}, {"w", tile.width()}, {"h", tile.height()},
                                {"sha256", io::sha256_hex(bytes)}});
        if (level != last)
            return;
        for (int y = std::max(y0, f.y0); y < std::min(y0 + tile.height(), f.y0 + f.size); ++y)
            for (int x = std::max(x0, f.x0); x < std::min(x0 + tile.width(), f.x0 + f.size); ++x)
                for (int ch = 0; ch < 3; ++ch)
                    focus(x - f.x0, y - f.y0, ch) = tile(x - x0, y - y0, ch);
    };
    const auto levels = cascade::run_cascade(anchor, c.ladder, *backend, *c.seed, opt, observer);

    StageIO io_{{out / level_name(0)}, {}};
    for (int i = 1; i <= last; ++i) {
        if (!levels[i].empty()) {
            io::write_raster(out / level_name(i), levels[i], kUnit8, 1);
            io_.outputs.push_back(out / level_name(i));
            io_.outputs.push_back(out / (level_name(i) + ".json"));
            continue;
        }
        auto& t = tiles[i];
        std::sort(t.begin(), t.end(), [](const json& a, const json& b) {
            return std::pair(a["y0"].get<int>(), a["x0"].get<int>()) < std::pair(b["y0"].get<int>(), b["x0"].get<int>());
        });
        const fs::path p = out / ("cascade/level_" + std::to_string(i) + "_tiles.json");
        io::write_text(p, json{{"level", i}, {"gsd", c.ladder.levels[i]}, {"tiles", t}}.dump(1));
        io_.outputs.push_back(p);
    }
    io::write_raster(out / "cascade/focus.png", focus, kUnit8);
    io_.outputs.push_back(out / "cascade/focus.png");
    io_.outputs.push_back(out / "cascade/focus.png.json");
    return io_;
}

StageIO stage_lift(const PipelineConfig& c, const fs::path& out)
{
    const RasterGrid ortho = io::read_raster(out / "cascade/focus.png");
    const auto backend = make_backend(c, "height", c.height_backend, sampler::Task::Height);
    const auto codec = sampler::make_codec("block_dct", 4);
    lift::HeightOptions opt;
    opt.steps = sampler::make_step_list(opt.schedule.T, c.steps);
    const lift::HeightMap h = lift::infer_height(ortho, *backend, *codec, {}, tiler::NoiseField(*c.seed), opt);
    lift::write_height(out / "lift/height.png", h);
    const TexturedMesh mesh = lift::height_to_mesh(lift::read_height(out / "lift/height.png"), ortho);
    write_glb(out / "lift/coarse.glb", mesh);
    return {{out / "cascade/focus.png", out / "cascade/focus.png.json"},
            {out / "lift/height.png", out / "lift/height.png.json", out / "lift/coarse.glb"}};
}

Paths lift_inputs(const fs::path& out)
{
    return {out / "cascade/focus.png", out / "cascade/focus.png.json", out / "lift/height.png",
            out / "lift/height.png.json"};
}

StageIO stage_render(const PipelineConfig& c, const fs::path& out)
{
    const TexturedMesh mesh = lifted_mesh(out);
    const multiview::Trajectory traj = multiview::default_trajectory(mesh, c.views, c.elevation_deg);
    const auto views =
        multiview::render_views(mesh, multiview::fov_intrinsics(c.image_size, c.image_size, c.fov_deg),
                                multiview::circular_trajectory(traj));
    return {lift_inputs(out), multiview::write_view_bundle(out / "render", views)};
}

Paths render_inputs(const fs::path& out, int n)
{
    Paths p = {out / "render/cameras.json"};
    for (int i = 0; i < n; ++i)
        p.push_back(out / ("render/view_" + std::to_string(i) + "_rgb.png"));
    return p;
}

StageIO stage_inpaint(const PipelineConfig& c, const fs::path& out)
{
    const TexturedMesh mesh = lifted_mesh(out);
    const Cameras cams = read_cameras(out);
    const auto rendered = multiview::read_view_bundle(out / "render");
    multiview::MultiViewBatch batch;
    batch.views = rerender(mesh, cams);
    for (std::size_t i = 0; i < batch.views.size(); ++i)
        batch.views[i].rgb = rendered[i].rgb; // 8-bit render, as a resumed run sees it
    const auto backend = make_backend(c, "multiview", c.multiview_backend, sampler::Task::MultiView);
    multiview::InpaintOptions opt;
    opt.steps = sampler::make_step_list(opt.schedule.T, c.steps);
    const multiview::ViewEmbeddingTable table(batch.size(), kEmbeddingWidth, *c.seed);
    const auto images = multiview::inpaint_views(batch, *backend, table, tiler::NoiseField(*c.seed), opt);
    StageIO r{lift_inputs(out), {}};
    const Paths ri = render_inputs(out, batch.size());
    r.inputs.insert(r.inputs.end(), ri.begin(), ri.end());
    for (int i = 0; i < batch.size(); ++i) {
        io::write_png(out / view_image(i), io::quantize_raster(images[i], kUnit8));
        r.outputs.push_back(out / view_image(i));
    }
    return r;
}

StageIO stage_bake(const PipelineConfig& c, const fs::path& out)
{
    const TexturedMesh mesh = lifted_mesh(out);
    const Cameras cams = read_cameras(out);
    const auto views = rerender(mesh, cams);
    const auto images = read_images(out, static_cast<int>(views.size()));
    const bake::BakeResult res = bake::bake(mesh, views, images, c.bake);
    StageIO r{lift_inputs(out), bake::write_atlas(out / "bake", res)};
    const Paths ri = render_inputs(out, static_cast<int>(views.size()));
    r.inputs.insert(r.inputs.end(), ri.begin(), ri.end());
    for (int i = 0; i < static_cast<int>(views.size()); ++i)
        r.inputs.push_back(out / view_image(i));
    write_glb(out / "bake/scene.glb", load_baked_mesh(c, out));
    r.outputs.push_back(out / "bake/scene.glb");
    return r;
}

json seam_report(const RasterGrid& r, int window)
{
    const metrics::SeamSpec s = metrics::seams_from_plan(tiler::plan_windows(r.width(), r.height(), window));
    if (s.empty())
        return nullptr;
    const double m = metrics::msg(r, s), g = metrics::interior_gradient(r, s);
    return {{"msg", m}, {"interior", g}, {"ratio", g > 0 ? m / g : 0.0}};
}

StageIO stage_metrics(const PipelineConfig& c, const fs::path& out)
{
    const TexturedMesh baked = load_baked_mesh(c, out);
    const Cameras cams = read_cameras(out);
    const auto views = rerender(baked, cams);
    const auto images = read_images(out, static_cast<int>(views.size()));
    StageIO r{lift_inputs(out), {}};
    json report;
    try {
        const bake::Consistency k = bake::reprojection_consistency(images, views);
        report["reprojection"] = {{"psnr", k.psnr}, {"ssim", k.ssim}, {"pixels", k.pixels}};
    } catch (const MetricError& e) {
        report["reprojection"] = {{"error", e.what()}};
    }
    report["seams"] = json::object();
    for (std::size_t i = 1; i < c.ladder.levels.size(); ++i)
        if (fs::exists(out / level_name(static_cast<int>(i)))) {
            r.inputs.push_back(out / level_name(static_cast<int>(i)));
            report["seams"][std::to_string(i)] = seam_report(io::read_raster(out / level_name(static_cast<int>(i))), 64);
        }
    const lift::HeightMap h = lift::read_height(out / "lift/height.png");
    report["height"] = {{"min_m", h.valid_range.min_m}, {"max_m", h.valid_range.max_m},
                        {"seams", seam_report(h.raster, 64)}};
    io::write_text(out / "metrics/report.json", report.dump(2));
    r.inputs.push_back(out / "bake/atlas.png");
    for (int i = 0; i < static_cast<int>(views.size()); ++i)
        r.inputs.push_back(out / view_image(i));
    r.outputs.push_back(out / "metrics/report.json");
    return r;
}

StageIO stage_qa(const PipelineConfig& c, const fs::path& out)
{
    const TexturedMesh baked = load_baked_mesh(c, out);
    const Cameras cams = read_cameras(out);
    const auto views = rerender(baked, cams);
    const RasterGrid height = lift::read_height(out / "lift/height.png").raster;
    const qa::SceneGroundTruth gt = qa::extract_ground_truth(baked, height, views);
    std::vector<qa::QARecord> records;
    for (const auto& v : views) {
        const auto rs = qa::derive_qa(gt, "render/view_" + std::to_string(v.index), v.index, *c.seed);
        records.insert(records.end(), rs.begin(), rs.end());
    }
    const int mismatches = qa::count_mismatches(records, qa::extract_ground_truth(baked, height, rerender(baked, cams)));
    if (mismatches)
        throw ContractError("qa: " + std::to_string(mismatches) + " answers failed re-derivation");
    qa::write_jsonl(out / "qa/qa.jsonl", records);
    io::write_text(out / "qa/ground_truth.json", gt.to_json().dump(1));
    StageIO r{lift_inputs(out), {out / "qa/qa.jsonl", out / "qa/ground_truth.json"}};
    r.inputs.push_back(out / "bake/atlas.png");
    r.inputs.push_back(out / "render/cameras.json");
    return r;
}

StageIO dispatch(const std::string& name, const PipelineConfig& c, const fs::path& out)
{
    if (name == "anchor") return stage_anchor(c, out);
    if (name == "cascade") return stage_cascade(c, out);
    if (name == "lift") return stage_lift(c, out);
    if (name == "render") return stage_render(c, out);
    if (name == "inpaint") return stage_inpaint(c, out);
    if (name == "bake") return stage_bake(c, out);
    if (name == "metrics") return stage_metrics(c, out);
    if (name == "qa") return stage_qa(c, out);
    throw ConfigError("unknown stage '" + name + "'");
}

json record_json(const StageRecord& r)
{
    auto files = [](const std::vector<FileHash>& fs_) {
        json a = json::array();
        for (const auto& f : fs_)
            a.push_back({{"path", f.path}, {"sha256", f.sha256}});
        return a;
    };
    json j = {{"name", r.name}, {"status", r.status}, {"inputs", files(r.inputs)},
              {"outputs", files(r.outputs)}, {"hash", r.hash}};
    if (!r.error.empty())
        j["error"] = r.error;
    return j;
}

StageRecord record_from_json(const json& j)
{
    StageRecord r;
    r.name = j.at("name");
    r.status = j.at("status");
    for (const auto& f : j.at("inputs"))
        r.inputs.push_back({f.at("path"), f.at("sha256")});
    for (const auto& f : j.at("outputs"))
        r.outputs.push_back({f.at("path"), f.at("sha256")});
    r.hash = j.at("hash");
    r.error = j.value("error", "");
    return r;
}

std::string config_hash(const PipelineConfig& c)
{
    const std::string s = c.to_json().dump();
    return io::sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

void write_manifest(const fs::path& out, const PipelineConfig& c, const std::vector<StageRecord>& stages)
{
    json m = {{"config_sha256", config_hash(c)}, {"stages", json::array()}};
    for (const auto& s : stages)
        m["stages"].push_back(record_json(s));
    io::write_text(out / "manifest.json", m.dump(2));
}

} // namespace

sampler::BackendRegistry default_registry()
{
    sampler::BackendRegistry r;
    sampler::register_sampler_backends(r);
    lift::register_lift_backends(r);
    multiview::register_multiview_backends(r);
    return r;
}

bool PipelineConfig::enabled(const std::string& stage) const
{
    const auto it = stages.find(stage);
    return it == stages.end() || it->second;
}

PipelineConfig PipelineConfig::from_json(const json& j)
{
    static const std::set<std::string> known = {"seed",  "anchor",   "ladder", "steps",  "backends",
                                                "backend_params", "focus_size", "trajectory", "bake",
                                                "stages", "threads"};
    if (!j.is_object())
        throw ConfigError("config: top level must be an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k))
            throw ConfigError("config: unknown key '" + k + "'");
    PipelineConfig c;
    try {
        if (j.contains("seed"))
            c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("anchor")) {
            c.anchor.terrain = j["anchor"].value("terrain", c.anchor.terrain);
            c.anchor.size = j["anchor"].value("size", c.anchor.size);
        }
        if (j.contains("ladder"))
            c.ladder = cascade::ladder_from_json(j["ladder"]);
        c.steps = j.value("steps", c.steps);
        if (j.contains("backends")) {
            const json& b = j["backends"];
            c.refine_backend = b.value("refine", c.refine_backend);
            c.height_backend = b.value("height", c.height_backend);
            c.multiview_backend = b.value("multiview", c.multiview_backend);
        }
        c.backend_params = j.value("backend_params", json::object());
        c.focus_size = j.value("focus_size", c.focus_size);
        if (j.contains("trajectory")) {
            const json& t = j["trajectory"];
            c.views = t.value("views", c.views);
            c.elevation_deg = t.value("elevation_deg", c.elevation_deg);
            c.image_size = t.value("image_size", c.image_size);
            c.fov_deg = t.value("fov_deg", c.fov_deg);
        }
        if (j.contains("bake")) {
            const json& b = j["bake"];
            c.bake.tau = b.value("tau", c.bake.tau);
            c.bake.atlas_size = b.value("atlas_size", c.bake.atlas_size);
            c.bake.texel_density = b.value("texel_density", c.bake.texel_density);
            c.bake.depth_epsilon = b.value("depth_epsilon", c.bake.depth_epsilon);
            c.bake.min_cosine = b.value("min_cosine", c.bake.min_cosine);
        }
        if (j.contains("stages"))
            for (const auto& [k, v] : j["stages"].items()) {
                if (std::find(kStages.begin(), kStages.end(), k) == kStages.end())
                    throw ConfigError("config: unknown stage '" + k + "'");
                c.stages[k] = v.get<bool>();
            }
        c.threads = j.value("threads", c.threads);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

json PipelineConfig::to_json() const
{
    json j;
    if (seed)
        j["seed"] = *seed;
    j["anchor"] = {{"terrain", anchor.terrain}, {"size", anchor.size}};
    j["ladder"] = cascade::ladder_to_json(ladder);
    j["steps"] = steps;
    j["backends"] = {{"refine", refine_backend}, {"height", height_backend}, {"multiview", multiview_backend}};
    j["backend_params"] = backend_params;
    j["focus_size"] = focus_size;
    j["trajectory"] = {{"views", views}, {"elevation_deg", elevation_deg}, {"image_size", image_size},
                       {"fov_deg", fov_deg}};
    j["bake"] = {{"tau", bake.tau},
                 {"atlas_size", bake.atlas_size},
                 {"texel_density", bake.texel_density},
                 {"depth_epsilon", bake.depth_epsilon},
                 {"min_cosine", bake.min_cosine}};
    j["stages"] = stages;
    // threads is deliberately absent: it never changes output bits.
    return j;
}

void PipelineConfig::validate(const sampler::BackendRegistry& registry) const
{
    if (!seed)
        throw ConfigError("config: seed is required (config \"seed\" or --seed)");
    const auto& classes = cascade::anchor_classes();
    if (std::find(classes.begin(), classes.end(), anchor.terrain) == classes.end())
        throw ConfigError("config: unknown anchor terrain '" + anchor.terrain + "'");
    if (anchor.size < 4)
        throw ConfigError("config: anchor.size must be >= 4");
    try {
        ladder.validate();
    } catch (const LadderError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (steps < 1 || steps > sampler::kDefaultT)
        throw ConfigError("config: steps must lie in [1, " + std::to_string(sampler::kDefaultT) + "]");
    const std::pair<std::string, sampler::Task> slots[] = {{refine_backend, sampler::Task::Refine},
                                                          {height_backend, sampler::Task::Height},
                                                          {multiview_backend, sampler::Task::MultiView}};
    for (const auto& [name, task] : slots) {
        if (!registry.contains(name))
            throw ConfigError("config: unknown backend '" + name + "'");
        try {
            registry.create_for(name, task, json::object());
        } catch (const RegistryError& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    if (focus_size < 8 || views < 1 || image_size < 8 || !(fov_deg > 0.0 && fov_deg < 180.0))
        throw ConfigError("config: focus_size, trajectory.views, image_size or fov_deg out of range");
    if (image_size % 4)
        throw ConfigError("config: trajectory.image_size must be a multiple of 4");
    try {
        bake.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (threads < 0)
        throw ConfigError("config: threads must be >= 0");
}

TexturedMesh load_baked_mesh(const PipelineConfig& c, const fs::path& out)
{
    const TexturedMesh mesh = lifted_mesh(out);
    const bake::FacePartition part = bake::classify_faces(mesh, c.bake.tau);
    const bake::AtlasLayout layout = bake::pack_atlas(mesh, part.vertical, c.bake.texel_density, c.bake.atlas_size);
    const RasterGrid atlas = io::dequantize_raster(io::read_png(out / "bake/atlas.png"), kUnit8, 1.0, {});
    return bake::attach_atlas(mesh, layout, atlas, &part);
}

StageRecord run_stage(const std::string& name, const PipelineConfig& c, const fs::path& out)
{
    const StageIO s = dispatch(name, c, out);
    StageRecord r;
    r.name = name;
    r.status = "done";
    r.inputs = hash_files(out, s.inputs);
    r.outputs = hash_files(out, s.outputs);
    r.hash = combined_hash(r.outputs);
    return r;
}

RunResult run_pipeline(const PipelineConfig& c, const fs::path& out, const std::optional<std::string>& only)
{
    c.validate(default_registry());
    if (only && std::find(kStages.begin(), kStages.end(), *only) == kStages.end())
        throw ConfigError("unknown stage '" + *only + "'");
    if (c.threads > 0)
        parallel::set_max_threads(c.threads);
    fs::create_directories(out);
    io::write_text(out / "config.json", c.to_json().dump(2));

    // Previous records survive a single-stage rerun.
    std::map<std::string, StageRecord> previous;
    if (only && fs::exists(out / "manifest.json")) {
        const json m = json::parse(io::read_text(out / "manifest.json"));
        for (const auto& s : m.at("stages"))
            previous[s.at("name").get<std::string>()] = record_from_json(s);
    }

    RunResult result;
    std::string blocked; // first disabled or failed stage
    for (const std::string& name : kStages) {
        StageRecord r;
        r.name = name;
        if (only && name != *only) {
            if (previous.count(name))
                result.stages.push_back(previous[name]);
            continue;
        }
        if (!c.enabled(name) && blocked.empty())
            blocked = name;
        if (!blocked.empty() && depends_on(name, blocked)) {
            r.status = "skipped";
            r.error = blocked == name ? "disabled" : "upstream stage '" + blocked + "' did not run";
            result.stages.push_back(r);
            continue;
        }
        try {
            r = run_stage(name, c, out);
        } catch (const Error& e) {
            r.status = "failed";
            r.error = e.what();
            result.ok = false;
            blocked = name;
        }
        result.stages.push_back(r);
    }
    write_manifest(out, c, result.stages);
    return result;
}

} // namespace strata::pipeline

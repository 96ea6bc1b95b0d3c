#pragma once

#include "strata/bake/bake.hpp"
#include "strata/cascade/anchor.hpp"
#include "strata/cascade/cascade.hpp"
#include "strata/sampler/backend.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace strata::pipeline {

// Stage order; each stage reads its inputs from the bundle on disk, so a
// single stage rerun from cached upstream artifacts equals the full run.
inline const std::vector<std::string> kStages = {"anchor", "cascade", "lift", "render",
                                                 "inpaint", "bake", "metrics", "qa"};

// A lifted block is a height-field mesh whose walls are thousands of narrow
// grid triangles; 2 texels per meter keeps a 256 m block inside a 1024 atlas.
inline bake::BakeConfig pipeline_bake_defaults()
{
    bake::BakeConfig b;
    b.texel_density = 2.0;
    return b;
}

struct PipelineConfig {
    std::optional<std::uint64_t> seed; // required; no implicit entropy
    cascade::AnchorSpec anchor;        // anchor.seed follows seed
    cascade::ScaleLadder ladder;
    int steps = 40;
    // Backend slots: refine (cascade), height (lift), multiview (inpaint).
    std::string refine_backend = "fractal_refiner";
    std::string height_backend = "procedural_height";
    std::string multiview_backend = "facade";
    nlohmann::json backend_params = nlohmann::json::object(); // {slot: {...}}
    int focus_size = 256;  // finest-level block lifted to 3D, multiple of 4
    int views = 8;
    double elevation_deg = 30.0;
    int image_size = 256;
    double fov_deg = 60.0;
    bake::BakeConfig bake = pipeline_bake_defaults();
    std::map<std::string, bool> stages; // missing entries mean enabled
    int threads = 0;                    // 0: hardware concurrency

    // Throws ConfigError on unknown keys, wrong types or invalid values.
    static PipelineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    // Checks everything from_json cannot: seed present, backends registered
    // and declaring their task, ladder ratios, bake settings.
    void validate(const sampler::BackendRegistry& registry) const;
    bool enabled(const std::string& stage) const;
};

// Registry holding every built-in backend.
sampler::BackendRegistry default_registry();

struct FileHash {
    std::string path; // relative to the bundle root
    std::string sha256;
};

struct StageRecord {
    std::string name;
    std::string status; // done, skipped, failed
    std::vector<FileHash> inputs;
    std::vector<FileHash> outputs;
    std::string hash;   // sha256 over output paths and hashes
    std::string error;
};

struct RunResult {
    std::vector<StageRecord> stages;
    bool ok = true;
};

// Runs the enabled stages in order (or only `only`), writing artifacts and
// <out>/manifest.json {config_sha256, stages: [{name, status, inputs,
// outputs, hash, error?}]}. A failing stage marks itself failed and every
// later stage skipped; the manifest is still written. Disabled stages and
// their dependents are skipped.
RunResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& out,
                       const std::optional<std::string>& only = std::nullopt);

// Single stage; throws on failure. Stage names as in kStages.
StageRecord run_stage(const std::string& name, const PipelineConfig& config, const std::filesystem::path& out);

// Baked mesh reconstructed from the bundle (lift + bake artifacts).
TexturedMesh load_baked_mesh(const PipelineConfig& config, const std::filesystem::path& out);

} // namespace strata::pipeline

#pragma once

#include "strata/core/camera.hpp"
#include "strata/core/mesh.hpp"
#include "strata/core/raster.hpp"
#include "strata/multiview/trajectory.hpp"
#include "strata/scenes/scenes.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace strata::qa {

inline constexpr double kObjectThreshold = 2.0; // meters above local terrain
inline constexpr double kTieTolerance = 0.5;    // meters
inline constexpr int kTerrainWindow = 24;       // median window half-size (pixels)

struct RegionStats {
    std::string name; // "all", "north", "south", "east", "west"
    double min_m = 0.0, mean_m = 0.0, max_m = 0.0;
};

// 4-connected region of heightMap pixels rising more than the object
// threshold above the local terrain median. Labels A, B, ... follow the
// raster order of each component's first pixel.
struct Component {
    std::string label;
    int pixels = 0;
    double area_m2 = 0.0;
    Vec2 centroid;
    double ground_m = 0.0; // mean terrain under the footprint
    double height_m = 0.0; // max height above terrain
    double top_m = 0.0;    // max absolute height
};

struct ViewOrdering {
    int view = 0;
    std::vector<int> near_to_far; // component indices in front of the camera
    std::vector<double> depth;    // per component, +inf when behind the camera
    std::vector<int> visible;     // components with at least one front-most pixel over the footprint
};

struct Relation {
    enum class Kind { HigherThan, NearerThan } kind;
    int a = 0, b = 0;
    int view = -1; // NearerThan only
    double margin = 0.0;
};

// Flat: relief under 1 m. Stepped: at least 40% of the terrain below 2 deg
// slope and 10% above 15 deg. Steep: mean slope 15 deg or more.
enum class TerrainClass { Flat, Gentle, Stepped, Steep };
const char* terrain_name(TerrainClass c) noexcept;

struct SceneGroundTruth {
    double object_threshold = kObjectThreshold;
    double tie_tolerance = kTieTolerance;
    std::vector<RegionStats> regions;
    std::vector<Component> components;
    std::vector<ViewOrdering> orderings;
    std::vector<Relation> relations;
    double terrain_relief_m = 0.0;     // range of the terrain median surface
    double terrain_mean_slope_deg = 0.0;
    TerrainClass terrain = TerrainClass::Flat;

    nlohmann::json to_json() const;
};

// Terrain surface: per-pixel median of the height map over a
// (2 kTerrainWindow + 1)^2 window clipped to the raster.
RasterGrid terrain_median(const RasterGrid& height_map);

// Components, per-view orderings (depth of the point at the component
// centroid, half way up the structure), relations with margins beyond the
// tie tolerance, and terrain statistics. Empty scenes give empty lists.
SceneGroundTruth extract_ground_truth(const TexturedMesh& mesh, const RasterGrid& height_map,
                                      std::span<const CameraView> views,
                                      double object_threshold = kObjectThreshold);

enum class Task { Spatial, Morphology, Counting, Geometry, Caption };
inline constexpr Task kTasks[] = {Task::Spatial, Task::Morphology, Task::Counting, Task::Geometry, Task::Caption};
const char* task_name(Task t) noexcept;

struct QARecord {
    std::string image;
    int view = 0;
    Task task = Task::Spatial;
    std::string template_id;
    nlohmann::json params; // template arguments (labels, indices)
    std::string question;
    std::string answer;
    std::string format; // boolean, number, text, choice, list
    std::vector<std::string> provenance;

    nlohmann::json to_json() const;
};

// Five records for one image (one per task, in kTasks order). Templates
// that the ground truth cannot support fall back to a per-task template
// that always applies. Template choice and argument picks are seeded by
// (seed, image).
std::vector<QARecord> derive_qa(const SceneGroundTruth& gt, const std::string& image, int view, std::uint64_t seed);

// Answer implied by the record's template and parameters under gt; throws
// ContractError for unknown templates.
std::string evaluate(const QARecord& record, const SceneGroundTruth& gt);

// Number of records whose answer differs from evaluate(record, gt).
int count_mismatches(std::span<const QARecord> records, const SceneGroundTruth& gt);

// One JSON object per line: {image, task, question, answer, format, provenance}.
void write_jsonl(const std::filesystem::path& path, std::span<const QARecord> records);

// Views along a circular trajectory with square images and a 60 degree
// horizontal field of view.
std::vector<CameraView> render_trajectory(const TexturedMesh& mesh, const multiview::Trajectory& traj,
                                          int image_size);

// Nadir height map of a scene at 1 m over the ground square.
RasterGrid scene_height_map(const scenes::Scene& scene);

struct SceneQA {
    std::string scene;
    SceneGroundTruth gt;
    std::vector<CameraView> views;
    std::vector<QARecord> records; // 5 per view, images named <scene>/view_<i>
};

SceneQA build_scene_qa(const scenes::Scene& scene, int n_views, int image_size, std::uint64_t seed);

// Re-extracts ground truth from the scene mesh and the bundle's cameras and
// counts records whose stored answer no longer holds.
int verify_scene_qa(const scenes::Scene& scene, const SceneQA& qa);

// Writes <dir>/<scene>/ view bundles, <dir>/<scene>/ground_truth.json,
// <dir>/qa.jsonl and <dir>/manifest.json
//   {scenes: [{name, domain, views, records}], records, per_task: {task: n}}.
// Scenes without raised structures count as the natural domain.
void write_dataset(const std::filesystem::path& dir, std::span<const SceneQA> scenes);

} // namespace strata::qa

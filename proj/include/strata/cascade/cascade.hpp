#pragma once

#include "strata/core/raster.hpp"
#include "strata/sampler/backend.hpp"
#include "strata/sampler/schedule.hpp"
#include "strata/tiler/unbounded.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <vector>

namespace strata::cascade {

// Resolution ladder, coarsest first; each level divides gsd by `factor`.
struct ScaleLadder {
    std::vector<double> levels{64.0, 16.0, 4.0, 1.0};
    int factor = 4;
    int patch = 256;

    // Throws LadderError unless adjacent ratios equal factor (relative 1e-9).
    void validate() const;
};

ScaleLadder ladder_from_json(const nlohmann::json& j);
nlohmann::json ladder_to_json(const ScaleLadder& l);

// Checks low.gsd == factor * target_gsd; throws LadderError otherwise.
void check_ratio(double low_gsd, double target_gsd, int factor);

// Bilinear x`factor` upsample of the target-frame rectangle [x0, x0+w) x
// [y0, y0+h). Target pixel X samples source coordinate (X + 0.5)/N - 0.5,
// clamped to the source; values are computed from global coordinates so any
// rectangle reproduces the corresponding part of the full upsample exactly.
RasterGrid upsample_region(const RasterGrid& low, int factor, int x0, int y0, int w, int h);
RasterGrid upsample(const RasterGrid& low, int factor);

inline constexpr int kEmbeddingDim = 16;

// c^(i+1): plane "lowres_up" (upsampled condition, same anchor and extent),
// the resolution embedding of target_gsd, and the world-lattice origin.
sampler::ConditionSet assemble_condition(const RasterGrid& low, double target_gsd, int factor,
                                         int embed_dim = kEmbeddingDim);
// Same for a sub-rectangle of the target frame.
sampler::ConditionSet assemble_condition_region(const RasterGrid& low, double target_gsd, int factor,
                                                int x0, int y0, int w, int h,
                                                int embed_dim = kEmbeddingDim);

struct CascadeOptions {
    sampler::NoiseSchedule schedule = sampler::linear_schedule();
    sampler::StepList steps = sampler::make_step_list(sampler::kDefaultT, sampler::kDefaultSteps);
    tiler::TileOptions tile;
    tiler::StreamOptions stream;
    // Levels above this pixel count are generated tile by tile.
    std::int64_t stream_threshold_px = 2048LL * 2048LL;
    // Levels above this pixel count are never held whole in memory; only the
    // tile observer sees them.
    std::int64_t materialize_limit_px = 4096LL * 4096LL;
    // Round each level to 8 bits before it conditions the next, matching a
    // run that reloads levels from PNG.
    bool quantize_levels = false;
    // Drop level i once level i+1 exists (Markov: nothing downstream reads it).
    bool retain_levels = true;
};

// Called for every output tile of every generated level (level index >= 1).
using TileObserver = std::function<void(int level, int x0, int y0, const RasterGrid& tile)>;

// x_{i+1} from x_i: tiled sampling over assemble_condition(x_i, target_gsd).
RasterGrid refine_once(const RasterGrid& x_i, double target_gsd, int factor,
                       const sampler::DenoiserBackend& backend, const tiler::NoiseField& field,
                       int level, const CascadeOptions& options);

// One raster per ladder level (index 0 is the anchor). Entries are empty when
// the level exceeded materialize_limit_px or was released (retain_levels off).
std::vector<RasterGrid> run_cascade(const RasterGrid& anchor, const ScaleLadder& ladder,
                                    const sampler::DenoiserBackend& backend, std::uint64_t seed,
                                    const CascadeOptions& options, const TileObserver& observer = {});

// 8-bit round trip applied between levels when quantize_levels is set.
RasterGrid quantize_unit_8bit(const RasterGrid& r);

} // namespace strata::cascade

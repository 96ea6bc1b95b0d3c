#pragma once

#include "strata/sampler/backend.hpp"
#include "strata/sampler/codec.hpp"
#include "strata/sampler/schedule.hpp"
#include "strata/tiler/noise_field.hpp"
#include "strata/tiler/plan.hpp"

#include <functional>

namespace strata::tiler {

enum class MergeMode { CenterCrop, Feather };
enum class NoiseMode { Shared, Independent };
enum class SamplerKind { Ddim, Ddpm };

MergeMode merge_mode_from_string(const std::string& s);
const char* to_string(MergeMode m) noexcept;

struct TileOptions {
    int window = 64;
    MergeMode merge = MergeMode::CenterCrop;
    NoiseMode noise = NoiseMode::Shared;
    SamplerKind sampler = SamplerKind::Ddim;
    int level = 0;
    int channels = 3;          // image-space channels of the generated state
    bool detail_noise = true;  // attach the "world_noise" plane (timestep slot 0)
};

// Tiled sampling over the extent covered by cond's planes (all planes share
// width/height). cond.origin is the world pixel of the extent's (0,0). Each
// window is sampled independently with x_T drawn from the field at its world
// pixels and merged per options.merge. The output takes the georef of the
// first plane. Throws ContractError for the stochastic sampler.
RasterGrid generate_unbounded(const sampler::ConditionSet& cond, const sampler::DenoiserBackend& backend,
                              const NoiseField& field, const sampler::StepList& steps,
                              const sampler::NoiseSchedule& schedule, const TileOptions& options);

// Latent variant: windows are cropped in pixel space, every condition plane is
// encoded, the state lives in latent space with noise addressed at world
// latent coordinates (world pixel / f), and decoded windows are merged in
// pixel space. Requires a block-local codec, window/2 divisible by f and an
// extent origin divisible by f.
RasterGrid generate_unbounded_latent(const sampler::ConditionSet& cond, const sampler::LatentCodec& codec,
                                     const sampler::DenoiserBackend& backend, const NoiseField& field,
                                     const sampler::StepList& steps, const sampler::NoiseSchedule& schedule,
                                     const TileOptions& options);

// Builds the condition set for the pixel rectangle [x0, x0+w) x [y0, y0+h)
// of a large extent. Must be a pure function of the rectangle.
using ConditionProvider = std::function<sampler::ConditionSet(int x0, int y0, int w, int h)>;
// Receives finished output tiles in row-major order.
using TileSink = std::function<void(int x0, int y0, const RasterGrid& tile)>;

struct StreamOptions {
    int tile = 1024;  // multiple of the window stride
    int margin = 64;  // multiple of the stride, >= window
};

// Generates a width x height extent tile by tile; each tile is produced from
// a margin-padded sub-extent whose windows coincide with the monolithic plan,
// so streamed pixels equal generate_unbounded over the whole extent.
void generate_streamed(int width, int height, const ConditionProvider& provider,
                       const sampler::LatentCodec* codec, const sampler::DenoiserBackend& backend,
                       const NoiseField& field, const sampler::StepList& steps,
                       const sampler::NoiseSchedule& schedule, const TileOptions& options,
                       const StreamOptions& stream, const TileSink& sink);

} // namespace strata::tiler

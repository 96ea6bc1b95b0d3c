#pragma once

#include "strata/core/raster.hpp"
#include "strata/sampler/backend.hpp"
#include "strata/sampler/codec.hpp"
#include "strata/sampler/schedule.hpp"
#include "strata/tiler/noise_field.hpp"
#include "strata/tiler/unbounded.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace strata::lift {

inline constexpr const char* kDefaultHeightPrompt = "predict the heights of prominent features";

struct HeightPrompt {
    std::string text = kDefaultHeightPrompt;
};

struct HeightRange {
    double min_m = 0.0;
    double max_m = 0.0;
};

// Single-channel height raster in meters, never negative, never NaN.
struct HeightMap {
    RasterGrid raster;
    HeightRange valid_range; // quantization range used at the file boundary

    // Clamps negatives to 0; throws DomainError on NaN or a multi-channel raster.
    static HeightMap from_meters(RasterGrid meters);
};

// 8-bit heights; data is row-major.
struct ByteRaster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;
};

// Affine map of [min, max] onto [0, 255] with round-half-up. Negative inputs
// are clamped to 0 first and everything is clamped into the range. Throws
// QuantizationError unless max > min.
ByteRaster quantize_height(const RasterGrid& h, HeightRange range);
RasterGrid dequantize_height(const ByteRaster& q, HeightRange range, double gsd = 1.0, Vec2 anchor = {});

// 8-bit PNG plus a JSON sidecar {min_m, max_m, gsd, anchor_x, anchor_y}.
void write_height(const std::filesystem::path& path, const HeightMap& h);
HeightMap read_height(const std::filesystem::path& path);

// Procedural height model in latent space. The state is normalized height
// (meters / envelope) encoded by a block DCT codec. prepare() decodes the
// "ortho" and "world_noise" latents, forms luminance blurred over a small
// box, pushes it plus world-anchored detail through a monotone shaping
// curve, and encodes the result as "prior_mean". All pixel-space filters
// reach at most 10 px, so the latent receptive radius is 3.
struct ProceduralHeightParams {
    int codec_factor = 4;
    double envelope_m = 40.0;   // declared output range is [0, envelope_m]
    double ground_m = 1.5;
    double relief_m = 3.0;      // amplitude of world-noise terrain undulation
    double building_m = 18.0;   // mean height of bright-roofed features
    double roof_lo = 0.55;      // luminance where the shaping curve starts rising
    double roof_hi = 0.72;      // and where it saturates
    double grain = 0.01;        // prior std in normalized units
};

class ProceduralHeightBackend final : public sampler::DenoiserBackend {
public:
    explicit ProceduralHeightBackend(ProceduralHeightParams p = {});
    std::string name() const override { return "procedural_height"; }
    int receptive_radius() const override { return 3; }
    bool supports(sampler::Task t) const override { return t == sampler::Task::Height; }
    sampler::ConditionSet prepare(const sampler::ConditionSet& cond) const override;
    RasterGrid predict_noise(const RasterGrid& x_t, int t, const sampler::NoiseSchedule& s,
                             const sampler::ConditionSet& cond) const override;

    const ProceduralHeightParams& params() const noexcept { return p_; }
    // Normalized pixel-space target before encoding; exposed for tests.
    RasterGrid target(const RasterGrid& ortho_px, const RasterGrid& noise_px, WorldPixel origin_px) const;

private:
    ProceduralHeightParams p_;
    sampler::BlockDctCodec codec_;
};

// Noise-field level reserved for height inference.
inline constexpr int kHeightLevel = 32;

struct HeightOptions {
    sampler::NoiseSchedule schedule = sampler::linear_schedule();
    sampler::StepList steps = sampler::make_step_list(sampler::kDefaultT, sampler::kDefaultSteps);
    tiler::TileOptions tile;
    double envelope_m = 40.0; // normalized state * envelope = meters
};

// Height for an RGB ortho through generate_unbounded_latent. The backend must
// declare the height task (RegistryError otherwise). The ortho's world pixel
// origin must be a multiple of the codec factor.
HeightMap infer_height(const RasterGrid& ortho, const sampler::DenoiserBackend& backend,
                       const sampler::LatentCodec& codec, const HeightPrompt& prompt,
                       const tiler::NoiseField& field, const HeightOptions& options = {});

// procedural_height.
void register_lift_backends(sampler::BackendRegistry& registry);

} // namespace strata::lift

#pragma once

#include "strata/core/camera.hpp"
#include "strata/multiview/attention.hpp"
#include "strata/sampler/backend.hpp"
#include "strata/sampler/codec.hpp"
#include "strata/tiler/noise_field.hpp"

#include <vector>

namespace strata::multiview {

// Noise-field level reserved for multi-view sampling; view i draws from
// field.derive(i) so views never share noise.
inline constexpr int kMultiViewLevel = 48;

// N rendered views to be completed jointly. Every view carries rgb,
// lateral_mask, world_pos and normal buffers.
struct MultiViewBatch {
    std::vector<CameraView> views;

    int size() const noexcept { return static_cast<int>(views.size()); }
    // Throws ContractError unless all views share intrinsics, size and carry
    // the buffers above.
    void validate() const;
};

// u = Concat[z, E(v), m]: latent channels first, then encoded features, then
// the mask as the last channel. Throws ContractError on size mismatch.
RasterGrid stack_input(const RasterGrid& z, const RasterGrid& encoded, const RasterGrid& mask);

// Latent-resolution mask: 1 where any pixel of the f x f block is masked.
RasterGrid latent_mask(const RasterGrid& mask, int factor);

struct InpaintOptions {
    sampler::NoiseSchedule schedule;
    sampler::StepList steps;
    std::string codec = "block_dct";
    int codec_factor = 4;
    int attention_radius = 1;

    InpaintOptions();
};

// Joint DDIM over all views in lockstep. Condition planes per view: "u"
// (stacked input), "encoded" (E of the masked image), "mask" (latent
// resolution), "image", "pixel_mask", "world_pos", "normal" (pixel
// resolution); extras carry the codec, attention radius and the view's
// embedding row. After every step the unmasked latent pixels are reset to
// the forward-diffused encoding of the input, and after decoding unmasked
// pixels are copied from the input, so known content is preserved exactly.
// Throws ContractError when the backend lacks Task::MultiView or the table
// size differs from the view count.
std::vector<RasterGrid> inpaint_views(const MultiViewBatch& batch, const sampler::DenoiserBackend& backend,
                                      const ViewEmbeddingTable& table, const tiler::NoiseField& field,
                                      const InpaintOptions& options = {});

// Deterministic facade appearance at world point p on a surface with
// normal n: a plastered wall with soft-edged window rows, anchored to the
// wall plane so every view sees the same texture.
void facade_color(const Vec3& p, const Vec3& n, double* rgb);

struct FacadeParams {
    double grain = 0.01;    // prior std on latent coefficients
    double mix = 0.1;       // weight of the cross-view consensus correction
    int patch = 8;          // token patch edge in latent pixels
    double bandwidth_m = 2.0;
};

// Procedural lateral-texture backend. Prior mean = facade_color on masked
// pixels, the known image elsewhere. Each step, masked patches become
// tokens (query/key = world position plus the view embedding, value = the
// current x0 estimate's block means); cross-view local attention pools
// corresponding surface points from neighbouring views and nudges each
// patch mean toward that consensus.
class FacadeBackend final : public sampler::DenoiserBackend {
public:
    explicit FacadeBackend(FacadeParams p = {});
    std::string name() const override { return "facade"; }
    int receptive_radius() const override { return sampler::kUnboundedRadius; }
    bool supports(sampler::Task t) const override { return t == sampler::Task::MultiView; }
    RasterGrid predict_noise(const RasterGrid& x_t, int t, const sampler::NoiseSchedule& s,
                             const sampler::ConditionSet& cond) const override;
    std::vector<sampler::ConditionSet> prepare_joint(std::span<const sampler::ConditionSet> conds) const override;
    std::vector<RasterGrid> predict_noise_joint(std::span<const RasterGrid> x_t, int t,
                                                const sampler::NoiseSchedule& s,
                                                std::span<const sampler::ConditionSet> conds) const override;

private:
    FacadeParams p_;
};

// "facade".
void register_multiview_backends(sampler::BackendRegistry& registry);

} // namespace strata::multiview

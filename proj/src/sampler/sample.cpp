#include "strata/sampler/sample.hpp"

#include "strata/core/errors.hpp"
#include "strata/sampler/diffusion.hpp"

#include <string>

namespace strata::sampler {

RasterGrid sample(const DenoiserBackend& backend, const ConditionSet& cond, const RasterGrid& init_noise,
                  const StepList& steps, const NoiseSchedule& s)
{
    const StepList list = normalize_step_list(steps, s.T);
    const ConditionSet prepared = backend.prepare(cond);
    RasterGrid x = init_noise;
    for (std::size_t k = 0; k + 1 < list.size(); ++k) {
        const int t = list[k];
        RasterGrid eps;
        try {
            eps = backend.predict_noise(x, t, s, prepared);
        } catch (const std::exception& e) {
            throw SamplingError("backend '" + backend.name() + "' failed at step " + std::to_string(k) +
                                " (t=" + std::to_string(t) + "): " + e.what());
        }
        if (!eps.same_shape(x))
            throw ContractError("backend '" + backend.name() + "' returned a mis-shaped prediction");
        ddim_step_inplace(x.data(), eps.data(), t, list[k + 1], s);
    }
    return x;
}

} // namespace strata::sampler

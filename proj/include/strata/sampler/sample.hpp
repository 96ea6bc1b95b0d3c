#pragma once

#include "strata/sampler/backend.hpp"
#include "strata/sampler/schedule.hpp"

namespace strata::sampler {

// Deterministic DDIM trajectory from x_T = init_noise along `steps` (trailing
// 0 implied). The output depends only on (backend, cond, init_noise, steps,
// schedule). Backend failures are rethrown as SamplingError naming the step.
RasterGrid sample(const DenoiserBackend& backend, const ConditionSet& cond, const RasterGrid& init_noise,
                  const StepList& steps, const NoiseSchedule& s);

} // namespace strata::sampler

#include "strata/sampler/backend.hpp"

#include "strata/core/errors.hpp"

namespace strata::sampler {

const char* task_name(Task t) noexcept
{
    switch (t) {
    case Task::Refine: return "refine";
    case Task::Height: return "height";
    case Task::MultiView: return "multiview";
    }
    return "unknown";
}

const RasterGrid& ConditionSet::plane(const std::string& name) const
{
    auto it = planes.find(name);
    if (it == planes.end())
        throw ContractError("condition set has no plane '" + name + "'");
    return it->second;
}

std::vector<RasterGrid> DenoiserBackend::predict_noise_joint(std::span<const RasterGrid>, int,
                                                             const NoiseSchedule&,
                                                             std::span<const ConditionSet>) const
{
    throw ContractError("backend '" + name() + "' has no cross-view support");
}

std::vector<ConditionSet> DenoiserBackend::prepare_joint(std::span<const ConditionSet> conds) const
{
    std::vector<ConditionSet> out;
    out.reserve(conds.size());
    for (const auto& c : conds)
        out.push_back(prepare(c));
    return out;
}

void BackendRegistry::add(const std::string& name, BackendFactory factory)
{
    factories_[name] = std::move(factory);
}

bool BackendRegistry::contains(const std::string& name) const { return factories_.count(name) != 0; }

std::vector<std::string> BackendRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto& [k, v] : factories_)
        out.push_back(k);
    return out;
}

std::unique_ptr<DenoiserBackend> BackendRegistry::create(const std::string& name,
                                                         const nlohmann::json& params) const
{
    auto it = factories_.find(name);
    if (it == factories_.end())
        throw RegistryError("unknown backend '" + name + "'");
    return it->second(params);
}

std::unique_ptr<DenoiserBackend> BackendRegistry::create_for(const std::string& name, Task task,
                                                             const nlohmann::json& params) const
{
    auto b = create(name, params);
    require_task(*b, task);
    return b;
}

void require_task(const DenoiserBackend& backend, Task task)
{
    if (!backend.supports(task))
        throw RegistryError("backend '" + backend.name() + "' does not support the " + task_name(task) +
                            " task");
}

} // namespace strata::sampler

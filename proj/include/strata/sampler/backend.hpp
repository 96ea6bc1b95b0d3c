#pragma once

#include "strata/core/geometry.hpp"
#include "strata/core/raster.hpp"
#include "strata/sampler/schedule.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace strata::sampler {

enum class Task { Refine, Height, MultiView };

const char* task_name(Task t) noexcept;

inline constexpr int kUnboundedRadius = -1;

// Condition set c handed to a backend. Every plane shares the pixel frame of
// the state being denoised; origin is the world-lattice coordinate of that
// frame's pixel (0,0) so backends can anchor procedural detail to the world.
// Well-known planes: "lowres_up" (upsampled coarser level), "world_noise"
// (detail noise drawn from the world field), "target", "prior_mean".
struct ConditionSet {
    std::map<std::string, RasterGrid> planes;
    std::vector<double> resolution_embedding;
    double target_gsd = 1.0;
    std::optional<std::string> prompt;
    std::optional<int> view_index;
    WorldPixel origin;
    int level = 0;
    nlohmann::json extras; // backend-specific side data (e.g. camera geometry)

    bool has(const std::string& name) const { return planes.count(name) != 0; }
    const RasterGrid& plane(const std::string& name) const;
};

// Noise prediction eps_theta(x_t, t, c). Implementations are deterministic and
// callable concurrently. A finite receptive_radius r promises that output
// pixel q depends only on inputs (state and condition planes) within
// Chebyshev distance r of q; prepare() counts as part of that function.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual std::string name() const = 0;
    virtual int receptive_radius() const = 0;
    virtual bool supports(Task task) const = 0;

    // Once-per-sample precompute over the condition set (pure).
    virtual ConditionSet prepare(const ConditionSet& cond) const { return cond; }

    virtual RasterGrid predict_noise(const RasterGrid& x_t, int t, const NoiseSchedule& s,
                                     const ConditionSet& cond) const = 0;

    // Joint prediction over a ring of views. Default: ContractError.
    virtual std::vector<RasterGrid> predict_noise_joint(std::span<const RasterGrid> x_t, int t,
                                                        const NoiseSchedule& s,
                                                        std::span<const ConditionSet> conds) const;
    virtual std::vector<ConditionSet> prepare_joint(std::span<const ConditionSet> conds) const;
};

using BackendFactory = std::function<std::unique_ptr<DenoiserBackend>(const nlohmann::json& params)>;

class BackendRegistry {
public:
    void add(const std::string& name, BackendFactory factory);
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;
    // Throws RegistryError for unknown names.
    std::unique_ptr<DenoiserBackend> create(const std::string& name,
                                            const nlohmann::json& params = nlohmann::json::object()) const;
    // As create, and also checks supports(task).
    std::unique_ptr<DenoiserBackend> create_for(const std::string& name, Task task,
                                                const nlohmann::json& params = nlohmann::json::object()) const;

private:
    std::map<std::string, BackendFactory> factories_;
};

// Throws RegistryError when the backend does not declare the task.
void require_task(const DenoiserBackend& backend, Task task);

} // namespace strata::sampler

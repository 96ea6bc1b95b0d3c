#include "strata/tiler/plan.hpp"

#include "strata/core/errors.hpp"

namespace strata::tiler {

namespace {

std::vector<int> axis_origins(int extent, int window, int stride)
{
    std::vector<int> out{0};
    if (extent <= window)
        return out;
    while (out.back() + window < extent)
        out.push_back(std::min(out.back() + stride, extent - window));
    return out;
}

std::vector<int> cuts(const std::vector<int>& origins, int window, int extent)
{
    std::vector<int> c{0};
    for (std::size_t k = 1; k < origins.size(); ++k)
        c.push_back((origins[k - 1] + window + origins[k]) / 2);
    c.push_back(extent);
    return c;
}

} // namespace

WindowPlan plan_windows(int width, int height, int window)
{
    if (width <= 0 || height <= 0)
        throw PlanError("plan_windows: extent must be positive");
    if (window <= 0 || window % 2 != 0)
        throw PlanError("plan_windows: window must be positive and even");
    WindowPlan p;
    p.width = width;
    p.height = height;
    p.window = window;
    p.stride = window / 2;
    p.xs = axis_origins(width, window, p.stride);
    p.ys = axis_origins(height, window, p.stride);
    for (std::size_t iy = 0; iy < p.ys.size(); ++iy)
        for (std::size_t ix = 0; ix < p.xs.size(); ++ix)
            p.windows.push_back({p.xs[ix], p.ys[iy], static_cast<int>(ix), static_cast<int>(iy)});
    return p;
}

std::vector<int> WindowPlan::x_cuts() const { return cuts(xs, window, width); }
std::vector<int> WindowPlan::y_cuts() const { return cuts(ys, window, height); }

nlohmann::json plan_to_json(const WindowPlan& plan)
{
    nlohmann::ordered_json j;
    j["windowPx"] = plan.window;
    j["stride"] = plan.stride;
    j["extent"] = {plan.width, plan.height};
    j["xs"] = plan.xs;
    j["ys"] = plan.ys;
    return j;
}

} // namespace strata::tiler

#pragma once

#include "strata/core/geometry.hpp"

#include <json.hpp>

#include <vector>

namespace strata::tiler {

struct Window {
    int x0 = 0; // offset inside the extent
    int y0 = 0;
    int ix = 0; // grid position
    int iy = 0;
};

// Sliding windows of size `window` at stride window/2, the last row/column
// clamped to the extent boundary. Windows are listed row-major.
struct WindowPlan {
    int width = 0;
    int height = 0;
    int window = 0;
    int stride = 0;
    std::vector<int> xs;
    std::vector<int> ys;
    std::vector<Window> windows;

    // Center-crop ownership along one axis: window k owns [cuts[k], cuts[k+1]).
    // Interior cuts sit at the midpoint of the overlap between k-1 and k.
    std::vector<int> x_cuts() const;
    std::vector<int> y_cuts() const;
};

// Throws PlanError for a non-positive extent or an odd/non-positive window.
// Extents smaller than the window yield one window at 0 along that axis
// (the caller pads and crops).
WindowPlan plan_windows(int width, int height, int window);

nlohmann::json plan_to_json(const WindowPlan& plan);

} // namespace strata::tiler

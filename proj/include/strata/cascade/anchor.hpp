#pragma once

#include "strata/core/raster.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace strata::cascade {

// Named procedural anchor generator standing in for text-to-image anchoring.
// Terrain classes: "urban", "rural", "mountain", "coast".
struct AnchorSpec {
    std::string terrain = "urban";
    std::uint64_t seed = 0;
    int size = 256;
};

const std::vector<std::string>& anchor_classes();

// RGB in [0,1], size x size at the given gsd, top-left corner at `anchor`.
// Throws ConfigError for an unknown class.
RasterGrid procedural_anchor(const AnchorSpec& spec, double gsd, Vec2 anchor = {});

} // namespace strata::cascade

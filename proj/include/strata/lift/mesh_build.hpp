#pragma once

#include "strata/core/mesh.hpp"
#include "strata/lift/height.hpp"

namespace strata::lift {

struct MeshOptions {
    double wall_threshold_m = 3.0;
};

// Regular grid mesh with one vertex per height pixel, placed at the pixel
// center (anchor.x + (i + 0.5) gsd, anchor.y - (j + 0.5) gsd, h(i, j)), and
// two upward-facing triangles per cell in row-major cell order:
//   (v[i,j], v[i,j+1], v[i+1,j]) and (v[i+1,j], v[i,j+1], v[i+1,j+1]).
// Faces whose corner heights differ by more than wall_threshold_m are steep
// by construction and tagged Vertical as a classification hint.
// Every face carries ortho UVs (page 0). h and ortho must share extent, gsd
// and anchor (ContractError otherwise).
TexturedMesh height_to_mesh(const HeightMap& h, const RasterGrid& ortho, const MeshOptions& options = {});

} // namespace strata::lift

#pragma once

#include "strata/core/camera.hpp"
#include "strata/core/mesh.hpp"

#include <vector>

namespace strata::multiview {

struct RenderOptions {
    double fill = 0.5;       // rgb of untextured faces
    double background = 0.0; // rgb where no face projects
    double near = 1e-3;      // camera-space clip plane (meters)
};

// Edge-function rasterizer. Triangles are clipped against the near plane,
// sampled at pixel centers (integer image coordinates) with a top-left fill
// rule, and depth tested on camera-space z. Attributes are interpolated
// perspective-correctly. Faces are visited in index order and replace the
// stored sample only when strictly nearer, so coincident depths keep the
// lower face index. Faces are two-sided. Textured faces sample their page
// bilinearly (clamped) at the interpolated UV; untextured faces get
// options.fill. Output is independent of the thread count.
CameraView rasterize(const TexturedMesh& mesh, const Intrinsics& k, const CameraPose& pose,
                     int index = 0, const RenderOptions& options = {});

std::vector<CameraView> render_views(const TexturedMesh& mesh, const Intrinsics& k,
                                     const std::vector<CameraPose>& poses,
                                     const RenderOptions& options = {});

} // namespace strata::multiview

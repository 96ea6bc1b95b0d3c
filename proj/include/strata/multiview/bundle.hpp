#pragma once

#include "strata/core/camera.hpp"

#include <filesystem>
#include <vector>

namespace strata::multiview {

// View bundle layout under dir:
//   view_<i>_rgb.png    8-bit RGB
//   view_<i>_mask.png   8-bit, 255 where lateral
//   view_<i>_depth.png  16-bit, depth / depth_scale, 0 where empty
//   cameras.json        {depth_scale, views: [{index, width, height, K, R, t}]}
// K and R are row-major 3x3. Returns the written file paths.
std::vector<std::filesystem::path> write_view_bundle(const std::filesystem::path& dir,
                                                     const std::vector<CameraView>& views);
// Restores rgb, lateral_mask, depth (quantized) and cameras.
std::vector<CameraView> read_view_bundle(const std::filesystem::path& dir);

} // namespace strata::multiview

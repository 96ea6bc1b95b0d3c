#pragma once

#include "strata/core/geometry.hpp"
#include "strata/core/raster.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace strata {

enum class FaceClass : std::uint8_t { Horizontal = 0, Vertical = 1 };

using Face = std::array<std::uint32_t, 3>;

// Triangle mesh in world meters. uv is per face corner in image convention
// (u right, v down, texel k centered at (k+0.5)/size). face_texture selects a
// texture page per face; -1 means untextured. Page 0 is conventionally the
// orthographic texture, page 1 the vertical-face atlas.
struct TexturedMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<FaceClass> face_class;
    std::vector<std::array<Vec2, 3>> uv;
    std::vector<int> face_texture;
    std::vector<RasterGrid> textures;

    std::size_t face_count() const noexcept { return faces.size(); }

    // Throws ContractError on index overflow or per-face array size mismatch.
    void validate() const;
};

// Axis-aligned bounding box of the vertex set; {0,0,0} pair when empty.
std::array<Vec3, 2> bounding_box(const TexturedMesh& mesh) noexcept;

} // namespace strata

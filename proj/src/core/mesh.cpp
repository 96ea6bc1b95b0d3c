#include "strata/core/mesh.hpp"

#include "strata/core/errors.hpp"

#include <algorithm>
#include <string>

namespace strata {

void TexturedMesh::validate() const
{
    const std::size_t nf = faces.size();
    if (face_class.size() != nf || uv.size() != nf || face_texture.size() != nf)
        throw ContractError("TexturedMesh: per-face arrays disagree with face count");
    for (std::size_t f = 0; f < nf; ++f) {
        for (auto v : faces[f])
            if (v >= vertices.size())
                throw ContractError("TexturedMesh: face " + std::to_string(f) +
                                    " references missing vertex");
        const int page = face_texture[f];
        if (page < -1 || page >= static_cast<int>(textures.size()))
            throw ContractError("TexturedMesh: face " + std::to_string(f) +
                                " references missing texture page");
    }
}

std::array<Vec3, 2> bounding_box(const TexturedMesh& mesh) noexcept
{
    if (mesh.vertices.empty())
        return {Vec3{}, Vec3{}};
    Vec3 lo = mesh.vertices.front();
    Vec3 hi = lo;
    for (const auto& v : mesh.vertices) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    return {lo, hi};
}

} // namespace strata

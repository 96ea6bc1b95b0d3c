#include "strata/lift/mesh_build.hpp"

#include "strata/core/errors.hpp"

#include <algorithm>
#include <cmath>

namespace strata::lift {

TexturedMesh height_to_mesh(const HeightMap& hm, const RasterGrid& ortho, const MeshOptions& options)
{
    const RasterGrid& h = hm.raster;
    if (h.width() != ortho.width() || h.height() != ortho.height())
        throw ContractError("height_to_mesh: height and ortho extents differ");
    if (std::fabs(h.gsd() - ortho.gsd()) > 1e-12 * h.gsd() || !(h.anchor() == ortho.anchor()))
        throw ContractError("height_to_mesh: height and ortho georeference differ");
    const int W = h.width(), H = h.height();
    if (W < 2 || H < 2)
        throw ContractError("height_to_mesh: need at least 2x2 pixels");

    TexturedMesh m;
    const double g = h.gsd();
    const Vec2 a = h.anchor();
    m.vertices.reserve(static_cast<std::size_t>(W) * H);
    for (int j = 0; j < H; ++j)
        for (int i = 0; i < W; ++i)
            m.vertices.push_back({a.x + (i + 0.5) * g, a.y - (j + 0.5) * g, h(i, j)});

    auto vid = [W](int i, int j) { return static_cast<std::uint32_t>(j * W + i); };
    auto uv = [W, H](int i, int j) { return Vec2{(i + 0.5) / W, (j + 0.5) / H}; };
    const std::size_t nf = 2 * static_cast<std::size_t>(W - 1) * (H - 1);
    m.faces.reserve(nf);
    m.uv.reserve(nf);
    m.face_class.reserve(nf);
    auto classify = [&](const Face& f) {
        const double a = m.vertices[f[0]].z, b = m.vertices[f[1]].z, c = m.vertices[f[2]].z;
        const double jump = std::max({a, b, c}) - std::min({a, b, c});
        return jump > options.wall_threshold_m ? FaceClass::Vertical : FaceClass::Horizontal;
    };
    for (int j = 0; j + 1 < H; ++j)
        for (int i = 0; i + 1 < W; ++i) {
            m.faces.push_back({vid(i, j), vid(i, j + 1), vid(i + 1, j)});
            m.uv.push_back({uv(i, j), uv(i, j + 1), uv(i + 1, j)});
            m.face_class.push_back(classify(m.faces.back()));
            m.faces.push_back({vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)});
            m.uv.push_back({uv(i + 1, j), uv(i, j + 1), uv(i + 1, j + 1)});
            m.face_class.push_back(classify(m.faces.back()));
        }
    m.face_texture.assign(m.faces.size(), 0);
    m.textures.push_back(ortho);
    return m;
}

} // namespace strata::lift

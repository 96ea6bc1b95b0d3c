#include "strata/multiview/rasterize.hpp"

#include "strata/core/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace strata::multiview {

namespace {

constexpr int kBandRows = 16;

struct ClipVertex {
    Vec3 cam;
    Vec3 world;
    Vec2 uv;
};

struct ScreenTri {
    int face = 0;
    double x[3], y[3], z[3];
    Vec3 world[3];
    Vec2 uv[3];
    double area = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1; // inclusive pixel bounds
};

ClipVertex lerp(const ClipVertex& a, const ClipVertex& b, double t)
{
    return {a.cam + (b.cam - a.cam) * t, a.world + (b.world - a.world) * t,
            {a.uv.x + (b.uv.x - a.uv.x) * t, a.uv.y + (b.uv.y - a.uv.y) * t}};
}

double edge(double ax, double ay, double bx, double by, double px, double py)
{
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Orientation has area > 0 (clockwise on a y-down screen): top edges run
// rightward horizontally, left edges run upward.
bool top_left(double ax, double ay, double bx, double by)
{
    return (ay == by && bx > ax) || by < ay;
}

std::vector<ScreenTri> setup_face(const TexturedMesh& mesh, int f, const Intrinsics& k, const CameraPose& pose,
                                  double near)
{
    std::vector<ClipVertex> poly;
    const Face& face = mesh.faces[f];
    for (int c = 0; c < 3; ++c) {
        const Vec3 w = mesh.vertices[face[c]];
        const Vec2 uv = mesh.uv.empty() ? Vec2{} : mesh.uv[f][c];
        poly.push_back({pose.to_camera(w), w, uv});
    }
    std::vector<ClipVertex> clipped;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const ClipVertex& p = poly[i];
        const ClipVertex& q = poly[(i + 1) % poly.size()];
        const bool pin = p.cam.z >= near, qin = q.cam.z >= near;
        if (pin)
            clipped.push_back(p);
        if (pin != qin)
            clipped.push_back(lerp(p, q, (near - p.cam.z) / (q.cam.z - p.cam.z)));
    }
    std::vector<ScreenTri> out;
    for (std::size_t i = 1; i + 1 < clipped.size(); ++i) {
        const ClipVertex* v[3] = {&clipped[0], &clipped[i], &clipped[i + 1]};
        ScreenTri t;
        t.face = f;
        for (int c = 0; c < 3; ++c) {
            t.z[c] = v[c]->cam.z;
            t.x[c] = k.fx * v[c]->cam.x / t.z[c] + k.cx;
            t.y[c] = k.fy * v[c]->cam.y / t.z[c] + k.cy;
            t.world[c] = v[c]->world;
            t.uv[c] = v[c]->uv;
        }
        t.area = edge(t.x[0], t.y[0], t.x[1], t.y[1], t.x[2], t.y[2]);
        if (t.area == 0.0 || !std::isfinite(t.area))
            continue;
        if (t.area < 0.0) {
            std::swap(t.x[1], t.x[2]);
            std::swap(t.y[1], t.y[2]);
            std::swap(t.z[1], t.z[2]);
            std::swap(t.world[1], t.world[2]);
            std::swap(t.uv[1], t.uv[2]);
            t.area = -t.area;
        }
        const double xmin = std::min({t.x[0], t.x[1], t.x[2]}), xmax = std::max({t.x[0], t.x[1], t.x[2]});
        const double ymin = std::min({t.y[0], t.y[1], t.y[2]}), ymax = std::max({t.y[0], t.y[1], t.y[2]});
        t.x0 = static_cast<int>(std::max(0.0, std::ceil(xmin)));
        t.x1 = static_cast<int>(std::min<double>(k.width - 1, std::floor(xmax)));
        t.y0 = static_cast<int>(std::max(0.0, std::ceil(ymin)));
        t.y1 = static_cast<int>(std::min<double>(k.height - 1, std::floor(ymax)));
        if (t.x0 <= t.x1 && t.y0 <= t.y1)
            out.push_back(t);
    }
    return out;
}

struct Sample {
    const ScreenTri* tri = nullptr;
    double b[3] = {0, 0, 0}; // perspective-correct barycentrics
    double z = std::numeric_limits<double>::infinity();
};

} // namespace

CameraView rasterize(const TexturedMesh& mesh, const Intrinsics& k, const CameraPose& pose, int index,
                     const RenderOptions& options)
{
    mesh.validate();
    const int W = k.width, H = k.height;
    CameraView view;
    view.index = index;
    view.intrinsics = k;
    view.pose = pose;
    view.rgb = RasterGrid(W, H, 3, 1.0, {}, options.background);
    view.depth = RasterGrid(W, H, 1, 1.0, {}, std::numeric_limits<double>::infinity());
    view.lateral_mask = RasterGrid(W, H, 1);
    view.world_pos = RasterGrid(W, H, 3);
    view.normal = RasterGrid(W, H, 3);
    view.face_id.assign(static_cast<std::size_t>(W) * H, -1);
    if (W < 1 || H < 1)
        return view;

    const int nf = static_cast<int>(mesh.face_count());
    std::vector<std::vector<ScreenTri>> tris(nf);
    std::vector<Vec3> normals(nf);
    parallel::parallel_for(nf, [&](std::size_t f) {
        tris[f] = setup_face(mesh, static_cast<int>(f), k, pose, options.near);
        const Face& fc = mesh.faces[f];
        normals[f] = normalized(cross(mesh.vertices[fc[1]] - mesh.vertices[fc[0]],
                                      mesh.vertices[fc[2]] - mesh.vertices[fc[0]]));
    });

    const int bands = (H + kBandRows - 1) / kBandRows;
    parallel::parallel_for(bands, [&](std::size_t band) {
        const int r0 = static_cast<int>(band) * kBandRows, r1 = std::min(H, r0 + kBandRows);
        std::vector<Sample> buf(static_cast<std::size_t>(r1 - r0) * W);
        for (const auto& list : tris)
            for (const ScreenTri& t : list) {
                const int ya = std::max(t.y0, r0), yb = std::min(t.y1, r1 - 1);
                const bool tl0 = top_left(t.x[1], t.y[1], t.x[2], t.y[2]);
                const bool tl1 = top_left(t.x[2], t.y[2], t.x[0], t.y[0]);
                const bool tl2 = top_left(t.x[0], t.y[0], t.x[1], t.y[1]);
                for (int y = ya; y <= yb; ++y)
                    for (int x = t.x0; x <= t.x1; ++x) {
                        const double w0 = edge(t.x[1], t.y[1], t.x[2], t.y[2], x, y);
                        const double w1 = edge(t.x[2], t.y[2], t.x[0], t.y[0], x, y);
                        const double w2 = edge(t.x[0], t.y[0], t.x[1], t.y[1], x, y);
                        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
                            continue;
                        if ((w0 == 0.0 && !tl0) || (w1 == 0.0 && !tl1) || (w2 == 0.0 && !tl2))
                            continue;
                        const double a0 = w0 / t.area / t.z[0], a1 = w1 / t.area / t.z[1],
                                     a2 = w2 / t.area / t.z[2];
                        const double z = 1.0 / (a0 + a1 + a2);
                        Sample& s = buf[static_cast<std::size_t>(y - r0) * W + x];
                        if (z < s.z) {
                            s.tri = &t;
                            s.z = z;
                            s.b[0] = a0 * z;
                            s.b[1] = a1 * z;
                            s.b[2] = a2 * z;
                        }
                    }
            }
        std::vector<double> texel(4);
        for (int y = r0; y < r1; ++y)
            for (int x = 0; x < W; ++x) {
                const Sample& s = buf[static_cast<std::size_t>(y - r0) * W + x];
                if (!s.tri)
                    continue;
                const ScreenTri& t = *s.tri;
                const int f = t.face;
                view.face_id[static_cast<std::size_t>(y) * W + x] = f;
                view.depth(x, y) = s.z;
                view.lateral_mask(x, y) = mesh.face_class[f] == FaceClass::Vertical ? 1.0 : 0.0;
                const Vec3 p = t.world[0] * s.b[0] + t.world[1] * s.b[1] + t.world[2] * s.b[2];
                view.world_pos(x, y, 0) = p.x;
                view.world_pos(x, y, 1) = p.y;
                view.world_pos(x, y, 2) = p.z;
                view.normal(x, y, 0) = normals[f].x;
                view.normal(x, y, 1) = normals[f].y;
                view.normal(x, y, 2) = normals[f].z;
                const int page = mesh.face_texture.empty() ? -1 : mesh.face_texture[f];
                if (page < 0 || page >= static_cast<int>(mesh.textures.size())) {
                    for (int c = 0; c < 3; ++c)
                        view.rgb(x, y, c) = options.fill;
                    continue;
                }
                const RasterGrid& tex = mesh.textures[page];
                const double u = t.uv[0].x * s.b[0] + t.uv[1].x * s.b[1] + t.uv[2].x * s.b[2];
                const double v = t.uv[0].y * s.b[0] + t.uv[1].y * s.b[1] + t.uv[2].y * s.b[2];
                texel.resize(tex.channels());
                bilinear_sample_clamped(tex, u * tex.width() - 0.5, v * tex.height() - 0.5, texel);
                for (int c = 0; c < 3; ++c)
                    view.rgb(x, y, c) = texel[std::min(c, tex.channels() - 1)];
            }
    });
    return view;
}

std::vector<CameraView> render_views(const TexturedMesh& mesh, const Intrinsics& k,
                                     const std::vector<CameraPose>& poses, const RenderOptions& options)
{
    std::vector<CameraView> out;
    out.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i)
        out.push_back(rasterize(mesh, k, poses[i], static_cast<int>(i), options));
    return out;
}

} // namespace strata::multiview

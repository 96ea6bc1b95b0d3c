#include "strata/scenes/scenes.hpp"

#include "strata/core/errors.hpp"
#include "strata/lift/mesh_build.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace strata::scenes {

namespace {

constexpr double kOrthoGsd = 0.5;

void ground_rgb(double x, double y, double* rgb)
{
    const double w = 0.05 * std::sin(0.3 * x) * std::cos(0.23 * y);
    rgb[0] = 0.42 + w;
    rgb[1] = 0.50 + 0.5 * w;
    rgb[2] = 0.32 - w;
}

Vec2 ground_uv(double x, double y, double half) { return {(x + half) / (2 * half), (half - y) / (2 * half)}; }

std::uint32_t push_vertex(TexturedMesh& m, Vec3 v)
{
    m.vertices.push_back(v);
    return static_cast<std::uint32_t>(m.vertices.size() - 1);
}

void push_face(TexturedMesh& m, Face f, std::array<Vec2, 3> uv, int page, FaceClass cls)
{
    m.faces.push_back(f);
    m.uv.push_back(uv);
    m.face_texture.push_back(page);
    m.face_class.push_back(cls);
}

// Ortho of the flat ground frame with building roofs painted in.
RasterGrid flat_ortho(const std::vector<Building>& buildings, double half)
{
    const int n = static_cast<int>(std::lround(2 * half / kOrthoGsd));
    RasterGrid o(n, n, 3, kOrthoGsd, {-half, half});
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 p = o.pixel_center(i, j);
            ground_rgb(p.x, p.y, &o(i, j, 0));
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& b : buildings)
                for (const auto& r : b.roof)
                    if (r.contains(p.x, p.y) && b.top > best) {
                        best = b.top;
                        const double w = 0.03 * std::sin(1.3 * p.x + 0.7 * p.y);
                        for (int c = 0; c < 3; ++c)
                            o(i, j, c) = b.roof_rgb[c] + w;
                    }
        }
    return o;
}

Scene flat_scene(std::string name, std::vector<Building> buildings)
{
    Scene s;
    s.name = std::move(name);
    const double h = kGroundHalf;
    TexturedMesh& m = s.mesh;
    const std::uint32_t a = push_vertex(m, {-h, -h, 0}), b = push_vertex(m, {h, -h, 0}),
                        c = push_vertex(m, {h, h, 0}), d = push_vertex(m, {-h, h, 0});
    push_face(m, {a, b, c}, {ground_uv(-h, -h, h), ground_uv(h, -h, h), ground_uv(h, h, h)}, 0,
              FaceClass::Horizontal);
    push_face(m, {a, c, d}, {ground_uv(-h, -h, h), ground_uv(h, h, h), ground_uv(-h, h, h)}, 0,
              FaceClass::Horizontal);
    TexturedMesh solids;
    for (const auto& bl : buildings) {
        add_building(m, bl, h);
        add_building(solids, bl, h);
    }
    m.textures.push_back(flat_ortho(buildings, h));
    s.focus = solids.vertices.empty() ? bounding_box(m) : bounding_box(solids);
    s.buildings = std::move(buildings);
    return s;
}

double terrace_height(double x)
{
    const double u = (x + kGroundHalf) / 12.0;
    const double f = u - std::floor(u);
    const double t = std::clamp((f - 0.7) / 0.3, 0.0, 1.0);
    return 2.0 * (std::floor(u) + t * t * (3 - 2 * t));
}

Scene terrace_scene()
{
    const int n = static_cast<int>(2 * kGroundHalf) + 1;
    RasterGrid h(n, n, 1, 1.0, {-kGroundHalf - 0.5, kGroundHalf + 0.5});
    RasterGrid o(n, n, 3, 1.0, h.anchor());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const Vec2 p = h.pixel_center(i, j);
            h(i, j) = terrace_height(p.x);
            ground_rgb(p.x, p.y, &o(i, j, 0));
            const double riser = terrace_height(p.x + 0.5) - terrace_height(p.x - 0.5);
            o(i, j, 0) += 0.08 * riser;
            o(i, j, 2) -= 0.03 * riser;
        }
    Scene s;
    s.name = "terrace";
    s.mesh = lift::height_to_mesh(lift::HeightMap::from_meters(h), o);
    s.focus = bounding_box(s.mesh);
    return s;
}

} // namespace

Building box_building(const std::string& name, Rect r, double height, double base)
{
    Building b;
    b.name = name;
    b.loops = {{{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}}};
    b.roof = {r};
    b.base = base;
    b.top = base + height;
    return b;
}

void add_building(TexturedMesh& m, const Building& b, double half)
{
    for (const auto& loop : b.loops)
        for (std::size_t e = 0; e < loop.size(); ++e) {
            const Vec2 p = loop[e], q = loop[(e + 1) % loop.size()];
            const std::uint32_t a0 = push_vertex(m, {p.x, p.y, b.base}), b0 = push_vertex(m, {q.x, q.y, b.base}),
                                b1 = push_vertex(m, {q.x, q.y, b.top}), a1 = push_vertex(m, {p.x, p.y, b.top});
            push_face(m, {a0, b0, b1}, {}, -1, FaceClass::Vertical);
            push_face(m, {a0, b1, a1}, {}, -1, FaceClass::Vertical);
        }
    for (const Rect& r : b.roof) {
        const std::uint32_t a = push_vertex(m, {r.x0, r.y0, b.top}), c = push_vertex(m, {r.x1, r.y0, b.top}),
                            d = push_vertex(m, {r.x1, r.y1, b.top}), e = push_vertex(m, {r.x0, r.y1, b.top});
        const Vec2 ua = ground_uv(r.x0, r.y0, half), uc = ground_uv(r.x1, r.y0, half),
                   ud = ground_uv(r.x1, r.y1, half), ue = ground_uv(r.x0, r.y1, half);
        push_face(m, {a, c, d}, {ua, uc, ud}, 0, FaceClass::Horizontal);
        push_face(m, {a, d, e}, {ua, ud, ue}, 0, FaceClass::Horizontal);
    }
}

std::vector<std::string> scene_names()
{
    return {"box", "two_box", "l_building", "terrace", "flat", "ring_of_towers", "courtyard"};
}

Scene make_scene(const std::string& name)
{
    if (name == "box")
        return flat_scene(name, {box_building("A", {-10, -10, 10, 10}, 10)});
    if (name == "two_box") {
        Building a = box_building("A", {-25, -6, -13, 6}, 10), b = box_building("B", {8, -6, 20, 6}, 20);
        b.roof_rgb[0] = 0.62;
        b.roof_rgb[1] = 0.40;
        b.roof_rgb[2] = 0.35;
        return flat_scene(name, {a, b});
    }
    if (name == "l_building") {
        Building b;
        b.name = "A";
        b.loops = {{{-15, -15}, {15, -15}, {15, -5}, {-5, -5}, {-5, 15}, {-15, 15}}};
        b.roof = {{-15, -15, 15, -5}, {-15, -5, -5, 15}};
        b.top = 12;
        return flat_scene(name, {b});
    }
    if (name == "terrace")
        return terrace_scene();
    if (name == "flat")
        return flat_scene(name, {});
    if (name == "ring_of_towers") {
        std::vector<Building> towers;
        for (int k = 0; k < 6; ++k) {
            const double a = k * std::numbers::pi / 3.0;
            const double cx = std::round(25 * std::cos(a)), cy = std::round(25 * std::sin(a));
            towers.push_back(box_building(std::string(1, static_cast<char>('A' + k)),
                                          {cx - 3, cy - 3, cx + 3, cy + 3}, 8 + 3 * k));
        }
        return flat_scene(name, towers);
    }
    if (name == "courtyard") {
        Building b;
        b.name = "A";
        b.loops = {{{-20, -20}, {20, -20}, {20, 20}, {-20, 20}}, {{-10, -10}, {-10, 10}, {10, 10}, {10, -10}}};
        b.roof = {{-20, -20, 20, -10}, {-20, 10, 20, 20}, {-20, -10, -10, 10}, {10, -10, 20, 10}};
        b.top = 15;
        return flat_scene(name, {b});
    }
    throw ConfigError("make_scene: unknown scene '" + name + "'");
}

RasterGrid height_from_mesh(const TexturedMesh& mesh, int width, int height, double gsd, Vec2 anchor)
{
    RasterGrid out(width, height, 1, gsd, anchor, -std::numeric_limits<double>::infinity());
    for (const Face& f : mesh.faces) {
        const Vec3 a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
        const double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if (std::fabs(area) < 1e-12)
            continue;
        const double xmin = std::min({a.x, b.x, c.x}), xmax = std::max({a.x, b.x, c.x});
        const double ymin = std::min({a.y, b.y, c.y}), ymax = std::max({a.y, b.y, c.y});
        const int i0 = std::max(0, static_cast<int>(std::floor((xmin - anchor.x) / gsd - 0.5)));
        const int i1 = std::min(width - 1, static_cast<int>(std::ceil((xmax - anchor.x) / gsd - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::floor((anchor.y - ymax) / gsd - 0.5)));
        const int j1 = std::min(height - 1, static_cast<int>(std::ceil((anchor.y - ymin) / gsd - 0.5)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                const Vec2 p = out.pixel_center(i, j);
                const double l1 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / area;
                const double l2 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / area;
                const double l0 = 1.0 - l1 - l2;
                if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12)
                    continue;
                out(i, j) = std::max(out(i, j), l0 * a.z + l1 * b.z + l2 * c.z);
            }
    }
    for (double& v : out.data())
        if (!std::isfinite(v))
            v = 0.0;
    return out;
}

} // namespace strata::scenes

#pragma once

#include "strata/core/mesh.hpp"
#include "strata/core/raster.hpp"

#include <array>
#include <string>
#include <vector>

namespace strata::scenes {

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    bool contains(double x, double y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

// Prism between base and top. Outer loops run counter-clockwise seen from
// above, hole loops clockwise, so every wall faces out of the solid. The
// roof is the union of disjoint rectangles matching the loops' interior.
struct Building {
    std::string name;
    std::vector<std::vector<Vec2>> loops;
    std::vector<Rect> roof;
    double base = 0.0;
    double top = 10.0;
    double roof_rgb[3] = {0.55, 0.55, 0.58};
};

Building box_building(const std::string& name, Rect footprint, double height, double base = 0.0);

struct Scene {
    std::string name;
    TexturedMesh mesh; // page 0 is the ortho texture; walls are untextured
    std::vector<Building> buildings;
    std::array<Vec3, 2> focus; // bounding box of the buildings (whole mesh when none)
};

// box, two_box, l_building, terrace, flat, ring_of_towers, courtyard.
std::vector<std::string> scene_names();
// Throws ConfigError for unknown names.
Scene make_scene(const std::string& name);

// Appends walls (two triangles per loop edge, counter-clockwise seen from
// outside) and roof rectangles to mesh. Walls get face_texture -1 and
// FaceClass Vertical; roofs sample page 0 at their planar position within
// the ground frame [-half, half]^2.
void add_building(TexturedMesh& mesh, const Building& b, double half);

// Nadir surface model: per pixel center, the highest mesh surface crossing
// the vertical line (faces with zero footprint area are skipped). Pixels
// with no surface get 0.
RasterGrid height_from_mesh(const TexturedMesh& mesh, int width, int height, double gsd, Vec2 anchor);

// Half extent of the flat ground quad.
inline constexpr double kGroundHalf = 60.0;

} // namespace strata::scenes

#pragma once

#include "strata/core/camera.hpp"
#include "strata/core/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace strata::bake {

struct BakeConfig {
    double tau = 0.3;            // vertical iff |n . z_up| < tau
    int atlas_size = 1024;
    double texel_density = 8.0;  // texels per meter
    double depth_epsilon = 0.0;  // <= 0 selects 0.5 / texel_density
    double min_cosine = 0.0;     // views need n . d_view > min_cosine

    double effective_depth_epsilon() const noexcept
    {
        return depth_epsilon > 0.0 ? depth_epsilon : 0.5 / texel_density;
    }
    // Throws ConfigError unless 0 < tau < 1, atlas_size is a power of two,
    // texel_density > 0 and min_cosine < 1.
    void validate() const;
};

struct FacePartition {
    std::vector<int> vertical;
    std::vector<int> horizontal;
    std::vector<int> degenerate; // also listed under horizontal
};

// Total, exclusive split by |n_f . z_up| < tau. Degenerate faces (area
// <= 1e-12 m^2) are reported and counted horizontal.
FacePartition classify_faces(const TexturedMesh& mesh, double tau);

inline constexpr int kGutter = 2;
inline constexpr double kMaxFill = 0.9;

// Axis-aligned chart for a connected set of coplanar faces. World point of
// chart coordinates (a, b) in meters: corner + s a + t b, with s horizontal
// along the plane (image right seen from the front) and t pointing down the
// plane (south for level faces). Texel (i, j) of the chart maps to
// a = (i + 0.5) width_m / w, b = (j + 0.5) height_m / h.
struct Chart {
    std::vector<int> faces;
    Vec3 corner, s, t, normal;
    double width_m = 0.0, height_m = 0.0;
    int w = 0, h = 0; // texels
    int x = 0, y = 0; // atlas position of texel (0, 0)

    Vec3 world(double a, double b) const noexcept { return corner + s * a + t * b; }
    Vec3 texel_world(int i, int j) const noexcept
    {
        return world((i + 0.5) * width_m / w, (j + 0.5) * height_m / h);
    }
};

struct AtlasLayout {
    int size = 0;
    std::vector<Chart> charts;
    std::vector<int> face_chart; // per mesh face, -1 when not charted
};

// One chart per coplanar edge-connected group of `faces`, sized
// ceil(extent * density) texels per axis, shelf-packed (tallest first) with
// kGutter texels between charts and around the border. Throws
// AtlasCapacityError (with the smallest sufficient power-of-two size) when
// chart area exceeds kMaxFill of the atlas or the shelves overflow.
AtlasLayout pack_atlas(const TexturedMesh& mesh, const std::vector<int>& faces, double texel_density,
                       int atlas_size);

// Fills every texel of every chart with fn(world point, chart normal, rgb),
// then copies chart borders one texel into the gutter.
RasterGrid paint_atlas(const AtlasLayout& layout, const std::function<void(const Vec3&, const Vec3&, double*)>& fn);

// Copy of mesh whose charted faces sample `atlas` (appended as a new page)
// through chart UVs; face_class follows the partition when given.
TexturedMesh attach_atlas(const TexturedMesh& mesh, const AtlasLayout& layout, const RasterGrid& atlas,
                          const FacePartition* partition = nullptr);

struct ViewChoice {
    int view = -1; // -1: unseen
    double x = 0.0, y = 0.0, depth = 0.0, cosine = 0.0;
};

// K_vis = views where P projects inside the image (pixel-center bounds),
// in front of the camera, and not behind the depth buffer by more than
// depth_epsilon. The buffer is read by bilinear interpolation of inverse
// depth over the four surrounding pixels (nearest pixel when one is empty). Picks the view maximizing n . d_view
// (unit vector from P to the camera center) among those above min_cosine;
// ties go to the lower index.
ViewChoice select_view(const Vec3& p, const Vec3& n, std::span<const CameraView> views, double depth_epsilon,
                       double min_cosine = 0.0);

enum class TexelStatus : std::uint8_t { Outside = 0, Baked = 1, Unseen = 2 };

struct TexelRecord {
    int atlas_x = 0, atlas_y = 0;
    Vec3 p, n;
    int face = -1;
    int chart = -1;
    ViewChoice choice;
    TexelStatus status = TexelStatus::Outside;
};

struct BakeResult {
    TexturedMesh mesh;
    FacePartition partition;
    AtlasLayout layout;
    RasterGrid atlas;
    std::vector<TexelRecord> texels;
    std::size_t baked = 0;
    std::size_t unseen = 0;

    double unseen_fraction() const noexcept
    {
        return baked + unseen ? static_cast<double>(unseen) / static_cast<double>(baked + unseen) : 0.0;
    }
};

// Back-projects the images J (one per view, same size as the view) onto the
// vertical-face atlas: every chart texel inside a face recovers its world
// point, picks a view with select_view and samples it bilinearly. Unseen and
// outside texels are filled by diffusion from baked chart texels (0.5 grey
// for charts with none). Horizontal faces keep their texture. Images may be
// empty, in which case each view's rgb is used.
BakeResult bake(const TexturedMesh& mesh, std::span<const CameraView> views, std::span<const RasterGrid> images,
                const BakeConfig& config = {});

struct Consistency {
    double psnr = 0.0;
    double ssim = 0.0;
    std::size_t pixels = 0;
};

// PSNR and SSIM (max 1) between sources and re-rendered views over the
// re-rendered lateral masks. Throws MetricError when no view has a masked
// pixel or counts differ.
Consistency reprojection_consistency(std::span<const RasterGrid> sources, std::span<const CameraView> rerendered);

// atlas.png (8-bit RGB) and charts.json {size, charts: [{faceId, uvRect,
// worldBasis}]} under dir. Returns both paths.
std::vector<std::filesystem::path> write_atlas(const std::filesystem::path& dir, const BakeResult& result);

} // namespace strata::bake

#pragma once

#include "strata/core/geometry.hpp"
#include "strata/core/raster.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace strata {

// Pinhole intrinsics in pixels. Pixel (i,j) center sits at image coordinate
// (i, j); the principal point uses the same convention.
struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    Mat3 matrix() const noexcept;
    bool operator==(const Intrinsics&) const = default;
};

// World to camera: X_c = R * P + t, camera looks down +z, x right, y down.
struct CameraPose {
    Mat3 R;
    Vec3 t;

    Vec3 center() const noexcept;
    Vec3 to_camera(const Vec3& p) const noexcept { return R * p + t; }
};

struct CameraView {
    int index = 0;
    Intrinsics intrinsics;
    CameraPose pose;
    RasterGrid rgb;          // 3 channels, [0,1]
    RasterGrid depth;        // camera-space z in meters, +inf where empty
    RasterGrid lateral_mask; // 1 where the front-most face is vertical
    std::vector<std::int32_t> face_id; // front-most face per pixel, -1 where empty
    RasterGrid world_pos;    // 3 channels, world point of the front-most surface
    RasterGrid normal;       // 3 channels, unit normal of the front-most face

    // Throws ContractError when R is not a rotation (det 1 within 1e-9,
    // orthonormal within 1e-9) or buffers disagree with the intrinsics.
    void validate() const;
};

struct Projection {
    double x = 0.0;
    double y = 0.0;
    double depth = 0.0;
};

// Pinhole projection; nullopt when the point is at or behind the camera
// plane (camera-space z <= 0).
std::optional<Projection> project_point(const Vec3& p, const Intrinsics& k,
                                        const CameraPose& pose) noexcept;

} // namespace strata

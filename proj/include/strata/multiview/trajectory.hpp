#pragma once

#include "strata/core/camera.hpp"
#include "strata/core/mesh.hpp"

#include <vector>

namespace strata::multiview {

inline constexpr int kDefaultViewCount = 8;
inline constexpr double kDefaultElevationDeg = 30.0;
inline constexpr double kDefaultRadiusScale = 1.2;

struct Trajectory {
    Vec3 center;
    double radius = 1.0;
    int n = kDefaultViewCount;
    double elevation_deg = kDefaultElevationDeg;

    double azimuth_deg(int i) const noexcept { return i * 360.0 / n; }
    // Camera position of view i: center + radius (cos e cos a, cos e sin a, sin e).
    Vec3 position(int i) const noexcept;
};

// Ring around the bounding box of `block`: center at the box center,
// radius = 1.2 x the box diagonal.
Trajectory default_trajectory(const TexturedMesh& block, int n = kDefaultViewCount,
                              double elevation_deg = kDefaultElevationDeg);

// World-to-camera pose looking from eye at target. Camera x is
// normalize(forward x up) (image right), y = forward x right (image down).
// When forward is parallel to up, world +y serves as up instead so that a
// straight-down camera has image-up pointing north. Throws
// DegenerateGeometryError when eye == target.
CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = WorldFrame::up);

// Throws DomainError for radius <= 0 or n < 1.
std::vector<CameraPose> circular_trajectory(const Trajectory& traj);

// Square-pixel pinhole with horizontal field of view fov_deg; principal
// point at the image center in pixel-center coordinates ((w-1)/2, (h-1)/2).
Intrinsics fov_intrinsics(int width, int height, double fov_deg);

} // namespace strata::multiview

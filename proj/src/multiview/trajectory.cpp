#include "strata/multiview/trajectory.hpp"

#include "strata/core/errors.hpp"

#include <cmath>
#include <numbers>

namespace strata::multiview {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

} // namespace

Vec3 Trajectory::position(int i) const noexcept
{
    const double a = radians(azimuth_deg(i));
    const double e = radians(elevation_deg);
    return center + Vec3{std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)} * radius;
}

Trajectory default_trajectory(const TexturedMesh& block, int n, double elevation_deg)
{
    const auto box = bounding_box(block);
    Trajectory t;
    t.center = (box[0] + box[1]) * 0.5;
    t.radius = kDefaultRadiusScale * norm(box[1] - box[0]);
    t.n = n;
    t.elevation_deg = elevation_deg;
    return t;
}

CameraPose look_at(const Vec3& eye, const Vec3& target, const Vec3& up)
{
    const Vec3 d = target - eye;
    if (norm(d) <= 1e-12)
        throw DegenerateGeometryError("look_at: eye coincides with target");
    const Vec3 f = normalized(d);
    Vec3 r = cross(f, up);
    if (norm(r) <= 1e-9 * norm(up))
        r = cross(f, Vec3{0.0, 1.0, 0.0});
    r = normalized(r);
    const Vec3 down = cross(f, r);
    CameraPose pose;
    pose.R = Mat3::from_rows(r, down, f);
    pose.t = -(pose.R * eye);
    return pose;
}

std::vector<CameraPose> circular_trajectory(const Trajectory& traj)
{
    if (!(traj.radius > 0.0))
        throw DomainError("circular_trajectory: radius must be positive");
    if (traj.n < 1)
        throw DomainError("circular_trajectory: need at least one view");
    std::vector<CameraPose> poses;
    poses.reserve(traj.n);
    for (int i = 0; i < traj.n; ++i)
        poses.push_back(look_at(traj.position(i), traj.center));
    return poses;
}

Intrinsics fov_intrinsics(int width, int height, double fov_deg)
{
    if (width < 1 || height < 1 || !(fov_deg > 0.0 && fov_deg < 180.0))
        throw DomainError("fov_intrinsics: bad image size or field of view");
    Intrinsics k;
    k.width = width;
    k.height = height;
    k.fx = k.fy = 0.5 * width / std::tan(radians(fov_deg) * 0.5);
    k.cx = 0.5 * (width - 1);
    k.cy = 0.5 * (height - 1);
    return k;
}

} // namespace strata::multiview

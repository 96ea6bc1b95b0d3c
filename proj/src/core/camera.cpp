#include "strata/core/camera.hpp"

#include "strata/core/errors.hpp"

#include <cmath>
#include <string>

namespace strata {

Mat3 Intrinsics::matrix() const noexcept
{
    Mat3 k;
    k.m = {fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0};
    return k;
}

Vec3 CameraPose::center() const noexcept { return -(R.transposed() * t); }

void CameraView::validate() const
{
    if (std::fabs(pose.R.determinant() - 1.0) > 1e-9)
        throw ContractError("CameraView: rotation determinant is not 1");
    const Mat3 rrt = pose.R * pose.R.transposed();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::fabs(rrt(i, j) - (i == j ? 1.0 : 0.0)) > 1e-9)
                throw ContractError("CameraView: rotation is not orthonormal");
    const int w = intrinsics.width;
    const int h = intrinsics.height;
    auto check = [&](const RasterGrid& r, const char* name) {
        if (!r.empty() && (r.width() != w || r.height() != h))
            throw ContractError(std::string("CameraView: ") + name + " size mismatch");
    };
    check(rgb, "rgb");
    check(depth, "depth");
    check(lateral_mask, "lateral_mask");
    check(world_pos, "world_pos");
    check(normal, "normal");
    if (!face_id.empty() && face_id.size() != static_cast<std::size_t>(w) * h)
        throw ContractError("CameraView: face_id size mismatch");
    for (double d : depth.data())
        if (std::isfinite(d) && d < 0.0)
            throw ContractError("CameraView: negative depth");
    for (double m : lateral_mask.data())
        if (m != 0.0 && m != 1.0)
            throw ContractError("CameraView: mask values must be 0 or 1");
}

std::optional<Projection> project_point(const Vec3& p, const Intrinsics& k,
                                        const CameraPose& pose) noexcept
{
    const Vec3 c = pose.to_camera(p);
    if (!(c.z > 0.0))
        return std::nullopt;
    return Projection{k.fx * (c.x / c.z) + k.cx, k.fy * (c.y / c.z) + k.cy, c.z};
}

} // namespace strata

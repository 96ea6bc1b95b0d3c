#include "strata/core/geometry.hpp"

#include "strata/core/errors.hpp"

namespace strata {

Mat3 Mat3::transposed() const noexcept
{
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r(i, j) = (*this)(j, i);
    return r;
}

double Mat3::determinant() const noexcept
{
    return dot(row(0), cross(row(1), row(2)));
}

Mat3 Mat3::from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) noexcept
{
    Mat3 r;
    r.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
    return r;
}

Mat3 operator*(const Mat3& a, const Mat3& b) noexcept
{
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
    return r;
}

Vec3 face_normal(const Vec3& p0, const Vec3& p1, const Vec3& p2)
{
    const Vec3 c = cross(p1 - p0, p2 - p0);
    const double len = norm(c);
    // Triangle area is half the cross-product length.
    if (!(0.5 * len > 1e-12))
        throw DegenerateGeometryError("face_normal: degenerate triangle");
    return c * (1.0 / len);
}

} // namespace strata

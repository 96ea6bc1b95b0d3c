#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace strata {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    constexpr bool operator==(const Vec2&) const = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const noexcept { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const noexcept { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const noexcept { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator-() const noexcept { return {-x, -y, -z}; }
    constexpr bool operator==(const Vec3&) const = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) noexcept
{
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

constexpr Vec3 cross(const Vec3& a, const Vec3& b) noexcept
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) noexcept { return std::sqrt(dot(v, v)); }

// Returns the zero vector for zero input; callers that care check first.
inline Vec3 normalized(const Vec3& v) noexcept
{
    const double n = norm(v);
    return n > 0.0 ? v * (1.0 / n) : Vec3{};
}

// Row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    constexpr double operator()(int r, int c) const noexcept { return m[r * 3 + c]; }
    constexpr double& operator()(int r, int c) noexcept { return m[r * 3 + c]; }

    constexpr Vec3 operator*(const Vec3& v) const noexcept
    {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    constexpr Vec3 row(int r) const noexcept { return {m[r * 3], m[r * 3 + 1], m[r * 3 + 2]}; }
    Mat3 transposed() const noexcept;
    double determinant() const noexcept;
    static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) noexcept;
};

Mat3 operator*(const Mat3& a, const Mat3& b) noexcept;

// Local planar world frame: meters, z up.
struct WorldFrame {
    static constexpr Vec3 up{0.0, 0.0, 1.0};
    static constexpr double meters_per_unit = 1.0;
};

// Integer pixel coordinate in a level's world-anchored lattice. Used to
// address the noise field so that overlapping windows agree.
struct WorldPixel {
    std::int64_t x = 0;
    std::int64_t y = 0;
    constexpr bool operator==(const WorldPixel&) const = default;
};

// Unit normal of triangle (p0, p1, p2), counter-clockwise winding seen from
// the side the normal points to. Throws DegenerateGeometryError when the
// triangle area is at or below 1e-12 m^2.
Vec3 face_normal(const Vec3& p0, const Vec3& p1, const Vec3& p2);

} // namespace strata

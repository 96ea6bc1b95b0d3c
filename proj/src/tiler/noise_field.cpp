#include "strata/tiler/noise_field.hpp"

#include <cmath>

namespace strata::tiler {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// One link of the address chain: absorb a 64-bit field into the state.
inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) noexcept { return mix64(h ^ mix64(v + kGolden)); }

inline double to_unit_open(std::uint64_t bits) noexcept
{
    // 53 high bits, offset by half an ulp so 0 and 1 are never produced.
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace

std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double normal_quantile(double p) noexcept
{
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                 45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
              133.14166789178437745) * r + 3.387132872796366608);
        const double den =
            (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                 21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
              42.313330701600911252) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                 0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
        val = num / den;
    }
    return q < 0.0 ? -val : val;
}

double NoiseField::draw(int level, int timestep, std::int64_t x, std::int64_t y, int channel) const noexcept
{
    std::uint64_t h = mix64(seed_);
    h = absorb(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(level)));
    h = absorb(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(timestep)));
    h = absorb(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(channel)));
    h = absorb(h, static_cast<std::uint64_t>(y));
    h = absorb(h, static_cast<std::uint64_t>(x));
    return normal_quantile(to_unit_open(h));
}

RasterGrid NoiseField::block(int level, int timestep, WorldPixel origin, int w, int h, int channels,
                             double gsd, Vec2 anchor) const
{
    RasterGrid out(w, h, channels, gsd, anchor);
    const std::uint64_t base = absorb(absorb(mix64(seed_), static_cast<std::uint64_t>(static_cast<std::int64_t>(level))),
                                      static_cast<std::uint64_t>(static_cast<std::int64_t>(timestep)));
    auto dst = out.data();
    for (int c = 0; c < channels; ++c) {
        const std::uint64_t hc = absorb(base, static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
        for (int y = 0; y < h; ++y) {
            // Row prefix computed once; identical to the chain in draw().
            const std::uint64_t hy = absorb(hc, static_cast<std::uint64_t>(origin.y + y));
            for (int x = 0; x < w; ++x) {
                const std::uint64_t hx = absorb(hy, static_cast<std::uint64_t>(origin.x + x));
                dst[out.index(x, y, c)] = normal_quantile(to_unit_open(hx));
            }
        }
    }
    return out;
}

NoiseField NoiseField::derive(std::uint64_t stream) const noexcept
{
    return NoiseField(mix64(seed_ ^ mix64(stream ^ 0x6a09e667f3bcc909ULL)));
}

} // namespace strata::tiler

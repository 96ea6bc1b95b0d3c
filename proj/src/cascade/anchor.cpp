#include "strata/cascade/anchor.hpp"

#include "strata/core/errors.hpp"
#include "strata/sampler/backends.hpp"
#include "strata/tiler/noise_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace strata::cascade {

namespace {

using Rgb = std::array<double, 3>;

// Anchor content lives on its own field level so it never aliases the
// cascade's per-level noise.
constexpr int kAnchorLevel = -1;

RasterGrid fbm(const tiler::NoiseField& field, int slot, int size, int cell)
{
    const RasterGrid white = field.block(kAnchorLevel, slot, {0, 0}, size, size, 1);
    RasterGrid v = sampler::world_value_noise(white, {0, 0}, cell);
    // Value noise has reduced variance; stretch to roughly unit spread.
    for (double& x : v.data())
        x = std::clamp(0.5 + 0.9 * x, 0.0, 1.0);
    return v;
}

Rgb lerp(const Rgb& a, const Rgb& b, double t)
{
    t = std::clamp(t, 0.0, 1.0);
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

double hash_unit(std::uint64_t seed, std::int64_t a, std::int64_t b)
{
    const std::uint64_t h = tiler::mix64(seed ^ tiler::mix64(static_cast<std::uint64_t>(a) * 0x9e37ULL +
                                                              tiler::mix64(static_cast<std::uint64_t>(b))));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Irregular parcel grid along one axis: block index per pixel and whether the
// pixel lies on the leading `border` pixels of its block. Spacings in
// [lo, lo + spread) keep the layout from locking onto any fixed period.
struct Parcels {
    std::vector<int> block;
    std::vector<char> edge;
};

Parcels parcels(std::uint64_t seed, std::int64_t axis, int n, int lo, int spread, int border)
{
    Parcels p{std::vector<int>(n), std::vector<char>(n)};
    int start = -static_cast<int>(hash_unit(seed, axis, -1) * lo);
    int next = start + lo + static_cast<int>(hash_unit(seed, axis, 0) * spread);
    int b = 0;
    for (int i = 0; i < n; ++i) {
        while (i >= next) {
            start = next;
            ++b;
            next = start + lo + static_cast<int>(hash_unit(seed, axis, b) * spread);
        }
        p.block[i] = b;
        p.edge[i] = i - start < border;
    }
    return p;
}

} // namespace

const std::vector<std::string>& anchor_classes()
{
    static const std::vector<std::string> k{"urban", "rural", "mountain", "coast"};
    return k;
}

RasterGrid procedural_anchor(const AnchorSpec& spec, double gsd, Vec2 anchor)
{
    if (std::find(anchor_classes().begin(), anchor_classes().end(), spec.terrain) == anchor_classes().end())
        throw ConfigError("unknown anchor terrain class '" + spec.terrain + "'");
    if (spec.size < 8)
        throw ConfigError("anchor size must be >= 8");
    const int n = spec.size;
    const tiler::NoiseField field(spec.seed);
    const RasterGrid elev = fbm(field, 1, n, 64);
    const RasterGrid detail = fbm(field, 2, n, 8);
    RasterGrid out(n, n, 3, gsd, anchor);

    const Rgb water{0.12, 0.25, 0.42}, sand{0.76, 0.70, 0.52}, grass{0.30, 0.46, 0.22},
        forest{0.14, 0.30, 0.14}, rock{0.48, 0.44, 0.40}, snow{0.93, 0.94, 0.96}, asphalt{0.32, 0.32, 0.34},
        roof_light{0.82, 0.80, 0.76}, roof_dark{0.55, 0.36, 0.30}, field_a{0.62, 0.58, 0.30},
        field_b{0.40, 0.52, 0.25};

    const bool urban = spec.terrain == "urban";
    const Parcels px = parcels(spec.seed, 11, n, urban ? 7 : 9, urban ? 7 : 8, urban ? 2 : 1);
    const Parcels py = parcels(spec.seed, 12, n, urban ? 7 : 9, urban ? 7 : 8, urban ? 2 : 1);

    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double e = elev(x, y);
            const double d = detail(x, y) - 0.5;
            Rgb c;
            if (spec.terrain == "mountain") {
                c = e < 0.45 ? lerp(forest, grass, e / 0.45) : e < 0.7 ? rock : lerp(rock, snow, (e - 0.7) / 0.1);
            } else if (spec.terrain == "coast") {
                c = e < 0.45 ? water : e < 0.5 ? sand : lerp(grass, forest, (e - 0.5) / 0.3);
            } else if (spec.terrain == "rural") {
                const double r = hash_unit(spec.seed, px.block[x], py.block[y]);
                c = r < 0.35 ? field_a : r < 0.7 ? field_b : lerp(grass, forest, e);
                if (px.edge[x] || py.edge[y])
                    c = sand;
            } else { // urban
                const bool road = px.edge[x] || py.edge[y];
                const double r = hash_unit(spec.seed, px.block[x], py.block[y]);
                c = road ? asphalt : r < 0.45 ? roof_light : r < 0.8 ? roof_dark : grass;
                if (e < 0.3)
                    c = lerp(water, c, e / 0.3);
            }
            for (int k = 0; k < 3; ++k)
                out(x, y, k) = std::clamp(c[k] + 0.08 * d, 0.0, 1.0);
        }
    return out;
}

} // namespace strata::cascade

#include "strata/bake/bake.hpp"

#include "strata/core/errors.hpp"
#include "strata/core/parallel.hpp"
#include "strata/io/files.hpp"
#include "strata/io/png.hpp"
#include "strata/metrics/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace strata::bake {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a)
    {
        while (parent[a] != a)
            a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[std::max(a, b)] = std::min(a, b);
    }
};

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Shelf packing of (w, h) boxes in the given order; false on overflow.
bool shelf_pack(std::vector<Chart>& charts, const std::vector<int>& order, int size)
{
    int x = kGutter, y = kGutter, shelf = 0;
    for (int id : order) {
        Chart& c = charts[id];
        if (x + c.w + kGutter > size) {
            y += shelf + kGutter;
            x = kGutter;
            shelf = 0;
        }
        if (x + c.w + kGutter > size || y + c.h + kGutter > size)
            return false;
        c.x = x;
        c.y = y;
        x += c.w + kGutter;
        shelf = std::max(shelf, c.h);
    }
    return true;
}

// Chart-plane coordinates of a world point.
Vec2 chart_coords(const Chart& c, const Vec3& p)
{
    const Vec3 d = p - c.corner;
    return {dot(d, c.s), dot(d, c.t)};
}

// Face owning each texel center of the chart (lowest face index wins), -1
// outside every face.
std::vector<int> texel_owners(const TexturedMesh& mesh, const Chart& c)
{
    std::vector<int> owner(static_cast<std::size_t>(c.w) * c.h, -1);
    const double sx = c.width_m / c.w, sy = c.height_m / c.h;
    const double tol = 1e-9;
    for (int f : c.faces) {
        Vec2 v[3];
        for (int k = 0; k < 3; ++k)
            v[k] = chart_coords(c, mesh.vertices[mesh.faces[f][k]]);
        const double area = (v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[1].y - v[0].y) * (v[2].x - v[0].x);
        if (std::fabs(area) <= 1e-15)
            continue;
        const double amin = std::min({v[0].x, v[1].x, v[2].x}), amax = std::max({v[0].x, v[1].x, v[2].x});
        const double bmin = std::min({v[0].y, v[1].y, v[2].y}), bmax = std::max({v[0].y, v[1].y, v[2].y});
        const int i0 = std::max(0, static_cast<int>(std::floor(amin / sx - 0.5)));
        const int i1 = std::min(c.w - 1, static_cast<int>(std::ceil(amax / sx - 0.5)));
        const int j0 = std::max(0, static_cast<int>(std::floor(bmin / sy - 0.5)));
        const int j1 = std::min(c.h - 1, static_cast<int>(std::ceil(bmax / sy - 0.5)));
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                int& o = owner[static_cast<std::size_t>(j) * c.w + i];
                if (o >= 0)
                    continue;
                const double a = (i + 0.5) * sx, b = (j + 0.5) * sy;
                const double l1 = ((a - v[0].x) * (v[2].y - v[0].y) - (b - v[0].y) * (v[2].x - v[0].x)) / area;
                const double l2 = ((v[1].x - v[0].x) * (b - v[0].y) - (v[1].y - v[0].y) * (a - v[0].x)) / area;
                if (l1 >= -tol && l2 >= -tol && 1.0 - l1 - l2 >= -tol)
                    o = f;
            }
    }
    return owner;
}

// Diffusion fill of unknown texels from known ones inside a w x h chart.
void diffuse_fill(std::vector<double>& rgb, std::vector<char>& known, int w, int h)
{
    if (std::none_of(known.begin(), known.end(), [](char k) { return k; })) {
        std::fill(rgb.begin(), rgb.end(), 0.5);
        return;
    }
    for (;;) {
        std::vector<std::size_t> front;
        std::vector<double> vals;
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i) {
                const std::size_t p = static_cast<std::size_t>(j) * w + i;
                if (known[p])
                    continue;
                double acc[3] = {0, 0, 0};
                int cnt = 0;
                const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
                for (const auto& q : nb) {
                    if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h)
                        continue;
                    const std::size_t r = static_cast<std::size_t>(q[1]) * w + q[0];
                    if (!known[r])
                        continue;
                    for (int c = 0; c < 3; ++c)
                        acc[c] += rgb[r * 3 + c];
                    ++cnt;
                }
                if (cnt) {
                    front.push_back(p);
                    for (double a : acc)
                        vals.push_back(a / cnt);
                }
            }
        if (front.empty())
            return;
        for (std::size_t k = 0; k < front.size(); ++k) {
            known[front[k]] = 1;
            for (int c = 0; c < 3; ++c)
                rgb[front[k] * 3 + c] = vals[k * 3 + c];
        }
    }
}

// Writes a chart's texels and copies its border one texel outward.
void blit_chart(RasterGrid& atlas, const Chart& c, const std::vector<double>& rgb)
{
    for (int j = -1; j <= c.h; ++j)
        for (int i = -1; i <= c.w; ++i) {
            const int ax = c.x + i, ay = c.y + j;
            if (ax < 0 || ay < 0 || ax >= atlas.width() || ay >= atlas.height())
                continue;
            const std::size_t src =
                static_cast<std::size_t>(std::clamp(j, 0, c.h - 1)) * c.w + std::clamp(i, 0, c.w - 1);
            for (int ch = 0; ch < 3; ++ch)
                atlas(ax, ay, ch) = rgb[src * 3 + ch];
        }
}

// Depth buffer at a sub-pixel position. Inverse depth is affine in screen
// space over a plane, so its bilinear blend is exact while all four samples
// see the same surface; with an empty sample the nearest pixel is used.
double buffer_depth(const RasterGrid& depth, double x, double y)
{
    const int x0 = std::min(static_cast<int>(x), depth.width() - 2 < 0 ? 0 : depth.width() - 2);
    const int y0 = std::min(static_cast<int>(y), depth.height() - 2 < 0 ? 0 : depth.height() - 2);
    const int x1 = std::min(x0 + 1, depth.width() - 1), y1 = std::min(y0 + 1, depth.height() - 1);
    const double d[4] = {depth(x0, y0), depth(x1, y0), depth(x0, y1), depth(x1, y1)};
    if (!std::all_of(d, d + 4, [](double v) { return std::isfinite(v); }))
        return depth(static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y)));
    const double fx = x - x0, fy = y - y0;
    const double inv = (1 - fy) * ((1 - fx) / d[0] + fx / d[1]) + fy * ((1 - fx) / d[2] + fx / d[3]);
    return 1.0 / inv;
}

} // namespace

void BakeConfig::validate() const
{
    if (!(tau > 0.0 && tau < 1.0))
        throw ConfigError("bake: tau must lie in (0, 1)");
    if (!is_pow2(atlas_size))
        throw ConfigError("bake: atlas size must be a power of two");
    if (!(texel_density > 0.0))
        throw ConfigError("bake: texel density must be positive");
    if (!(min_cosine < 1.0))
        throw ConfigError("bake: min_cosine must be below 1");
}

FacePartition classify_faces(const TexturedMesh& mesh, double tau)
{
    FacePartition p;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& fc = mesh.faces[f];
        try {
            const Vec3 n = face_normal(mesh.vertices[fc[0]], mesh.vertices[fc[1]], mesh.vertices[fc[2]]);
            (std::fabs(dot(n, WorldFrame::up)) < tau ? p.vertical : p.horizontal).push_back(static_cast<int>(f));
        } catch (const DegenerateGeometryError&) {
            p.degenerate.push_back(static_cast<int>(f));
            p.horizontal.push_back(static_cast<int>(f));
        }
    }
    return p;
}

AtlasLayout pack_atlas(const TexturedMesh& mesh, const std::vector<int>& faces, double density, int atlas_size)
{
    if (!(density > 0.0) || !is_pow2(atlas_size))
        throw ConfigError("pack_atlas: density must be positive and atlas size a power of two");
    AtlasLayout layout;
    layout.size = atlas_size;
    layout.face_chart.assign(mesh.faces.size(), -1);

    std::vector<int> usable;
    std::vector<Vec3> normal(mesh.faces.size());
    for (int f : faces) {
        const Face& fc = mesh.faces[f];
        try {
            normal[f] = face_normal(mesh.vertices[fc[0]], mesh.vertices[fc[1]], mesh.vertices[fc[2]]);
            usable.push_back(f);
        } catch (const DegenerateGeometryError&) {
        }
    }
    std::sort(usable.begin(), usable.end());
    usable.erase(std::unique(usable.begin(), usable.end()), usable.end());

    // Group coplanar faces that share an edge.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<int>> edges;
    for (std::size_t k = 0; k < usable.size(); ++k) {
        const Face& fc = mesh.faces[usable[k]];
        for (int e = 0; e < 3; ++e) {
            const std::uint32_t a = fc[e], b = fc[(e + 1) % 3];
            edges[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(k));
        }
    }
    UnionFind uf(usable.size());
    for (const auto& [edge, list] : edges)
        for (std::size_t i = 0; i < list.size(); ++i)
            for (std::size_t j = i + 1; j < list.size(); ++j) {
                const int fa = usable[list[i]], fb = usable[list[j]];
                const Vec3 p = mesh.vertices[mesh.faces[fa][0]];
                bool coplanar = dot(normal[fa], normal[fb]) >= 1.0 - 1e-9;
                for (int c = 0; c < 3 && coplanar; ++c)
                    coplanar = std::fabs(dot(mesh.vertices[mesh.faces[fb][c]] - p, normal[fa])) <= 1e-9;
                if (coplanar)
                    uf.unite(list[i], list[j]);
            }
    std::map<int, int> root_chart;
    for (std::size_t k = 0; k < usable.size(); ++k) {
        const int r = uf.find(static_cast<int>(k));
        auto it = root_chart.find(r);
        if (it == root_chart.end()) {
            it = root_chart.emplace(r, static_cast<int>(layout.charts.size())).first;
            layout.charts.emplace_back();
        }
        layout.charts[it->second].faces.push_back(usable[k]);
        layout.face_chart[usable[k]] = it->second;
    }

    double area = 0.0;
    for (Chart& c : layout.charts) {
        c.normal = normal[c.faces[0]];
        Vec3 s = cross(WorldFrame::up, c.normal);
        c.s = norm(s) > 1e-9 ? normalized(s) : Vec3{1.0, 0.0, 0.0};
        c.t = cross(c.s, c.normal);
        const Vec3 o = mesh.vertices[mesh.faces[c.faces[0]][0]];
        double amin = 0, amax = 0, bmin = 0, bmax = 0;
        for (int f : c.faces)
            for (int k = 0; k < 3; ++k) {
                const Vec3 d = mesh.vertices[mesh.faces[f][k]] - o;
                amin = std::min(amin, dot(d, c.s));
                amax = std::max(amax, dot(d, c.s));
                bmin = std::min(bmin, dot(d, c.t));
                bmax = std::max(bmax, dot(d, c.t));
            }
        c.corner = o + c.s * amin + c.t * bmin;
        c.width_m = amax - amin;
        c.height_m = bmax - bmin;
        c.w = std::max(1, static_cast<int>(std::ceil(c.width_m * density - 1e-9)));
        c.h = std::max(1, static_cast<int>(std::ceil(c.height_m * density - 1e-9)));
        area += static_cast<double>(c.w) * c.h;
    }

    std::vector<int> order(layout.charts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const Chart &ca = layout.charts[a], &cb = layout.charts[b];
        return ca.h != cb.h ? ca.h > cb.h : ca.w > cb.w;
    });
    auto fits = [&](int size) {
        return area <= kMaxFill * static_cast<double>(size) * size && shelf_pack(layout.charts, order, size);
    };
    if (!fits(atlas_size)) {
        int need = atlas_size;
        do
            need *= 2;
        while (need < (1 << 16) && !fits(need));
        throw AtlasCapacityError("pack_atlas: charts do not fit a " + std::to_string(atlas_size) + " atlas (need " +
                                     std::to_string(need) + ")",
                                 need);
    }
    return layout;
}

RasterGrid paint_atlas(const AtlasLayout& layout, const std::function<void(const Vec3&, const Vec3&, double*)>& fn)
{
    RasterGrid atlas(layout.size, layout.size, 3);
    for (const Chart& c : layout.charts) {
        std::vector<double> rgb(static_cast<std::size_t>(c.w) * c.h * 3);
        for (int j = 0; j < c.h; ++j)
            for (int i = 0; i < c.w; ++i)
                fn(c.texel_world(i, j), c.normal, &rgb[(static_cast<std::size_t>(j) * c.w + i) * 3]);
        blit_chart(atlas, c, rgb);
    }
    return atlas;
}

TexturedMesh attach_atlas(const TexturedMesh& mesh, const AtlasLayout& layout, const RasterGrid& atlas,
                          const FacePartition* partition)
{
    TexturedMesh out = mesh;
    const std::size_t nf = out.faces.size();
    out.uv.resize(nf);
    out.face_texture.resize(nf, -1);
    out.face_class.resize(nf, FaceClass::Horizontal);
    const int page = static_cast<int>(out.textures.size());
    out.textures.push_back(atlas);
    for (std::size_t f = 0; f < nf; ++f) {
        const int ci = layout.face_chart[f];
        if (ci < 0)
            continue;
        const Chart& c = layout.charts[ci];
        for (int k = 0; k < 3; ++k) {
            const Vec2 ab = chart_coords(c, out.vertices[out.faces[f][k]]);
            out.uv[f][k] = {(c.x + ab.x / c.width_m * c.w) / layout.size, (c.y + ab.y / c.height_m * c.h) / layout.size};
        }
        out.face_texture[f] = page;
    }
    if (partition) {
        for (int f : partition->vertical)
            out.face_class[f] = FaceClass::Vertical;
        for (int f : partition->horizontal)
            out.face_class[f] = FaceClass::Horizontal;
    }
    return out;
}

ViewChoice select_view(const Vec3& p, const Vec3& n, std::span<const CameraView> views, double eps,
                       double min_cosine)
{
    ViewChoice best;
    for (std::size_t k = 0; k < views.size(); ++k) {
        const CameraView& v = views[k];
        const auto pr = project_point(p, v.intrinsics, v.pose);
        if (!pr)
            continue;
        if (pr->x < 0.0 || pr->y < 0.0 || pr->x > v.intrinsics.width - 1 || pr->y > v.intrinsics.height - 1)
            continue;
        if (!(pr->depth <= buffer_depth(v.depth, pr->x, pr->y) + eps))
            continue;
        const double cosv = dot(n, normalized(v.pose.center() - p));
        if (!(cosv > min_cosine))
            continue;
        if (best.view < 0 || cosv > best.cosine)
            best = {static_cast<int>(k), pr->x, pr->y, pr->depth, cosv};
    }
    return best;
}

BakeResult bake(const TexturedMesh& mesh, std::span<const CameraView> views, std::span<const RasterGrid> images,
                const BakeConfig& config)
{
    config.validate();
    mesh.validate();
    if (!images.empty() && images.size() != views.size())
        throw ContractError("bake: image count differs from view count");
    for (std::size_t k = 0; k < views.size(); ++k) {
        const RasterGrid& img = images.empty() ? views[k].rgb : images[k];
        if (img.width() != views[k].intrinsics.width || img.height() != views[k].intrinsics.height ||
            img.channels() < 3 || views[k].depth.empty())
            throw ContractError("bake: view images or depth buffers do not match the intrinsics");
    }

    BakeResult r;
    r.partition = classify_faces(mesh, config.tau);
    r.layout = pack_atlas(mesh, r.partition.vertical, config.texel_density, config.atlas_size);
    const double eps = config.effective_depth_epsilon();
    const auto& charts = r.layout.charts;

    std::vector<std::vector<TexelRecord>> records(charts.size());
    std::vector<std::vector<double>> colours(charts.size());
    parallel::parallel_for(charts.size(), [&](std::size_t ci) {
        const Chart& c = charts[ci];
        const auto owner = texel_owners(mesh, c);
        std::vector<double>& rgb = colours[ci];
        rgb.assign(static_cast<std::size_t>(c.w) * c.h * 3, 0.0);
        std::vector<char> known(static_cast<std::size_t>(c.w) * c.h, 0);
        std::vector<double> px(std::max(3, images.empty() ? 3 : images[0].channels()));
        for (int j = 0; j < c.h; ++j)
            for (int i = 0; i < c.w; ++i) {
                const std::size_t q = static_cast<std::size_t>(j) * c.w + i;
                TexelRecord t;
                t.atlas_x = c.x + i;
                t.atlas_y = c.y + j;
                t.p = c.texel_world(i, j);
                t.n = c.normal;
                t.face = owner[q];
                t.chart = static_cast<int>(ci);
                if (t.face >= 0) {
                    t.choice = select_view(t.p, t.n, views, eps, config.min_cosine);
                    if (t.choice.view >= 0) {
                        const RasterGrid& img = images.empty() ? views[t.choice.view].rgb : images[t.choice.view];
                        px.resize(img.channels());
                        bilinear_sample_clamped(img, t.choice.x, t.choice.y, px);
                        for (int ch = 0; ch < 3; ++ch)
                            rgb[q * 3 + ch] = px[ch];
                        known[q] = 1;
                        t.status = TexelStatus::Baked;
                    } else {
                        t.status = TexelStatus::Unseen;
                    }
                }
                records[ci].push_back(t);
            }
        diffuse_fill(rgb, known, c.w, c.h);
    });

    r.atlas = RasterGrid(r.layout.size, r.layout.size, 3);
    for (std::size_t ci = 0; ci < charts.size(); ++ci) {
        blit_chart(r.atlas, charts[ci], colours[ci]);
        for (const TexelRecord& t : records[ci]) {
            r.baked += t.status == TexelStatus::Baked;
            r.unseen += t.status == TexelStatus::Unseen;
            r.texels.push_back(t);
        }
    }
    r.mesh = attach_atlas(mesh, r.layout, r.atlas, &r.partition);
    return r;
}

Consistency reprojection_consistency(std::span<const RasterGrid> sources, std::span<const CameraView> rerendered)
{
    if (sources.size() != rerendered.size() || sources.empty())
        throw MetricError("reprojection_consistency: source and view counts differ");
    Consistency out;
    double se = 0.0, ssim_sum = 0.0;
    int ssim_views = 0;
    for (std::size_t k = 0; k < sources.size(); ++k) {
        const RasterGrid& a = sources[k];
        const CameraView& v = rerendered[k];
        if (!a.same_shape(v.rgb))
            throw MetricError("reprojection_consistency: image shapes differ");
        std::size_t count = 0;
        for (int y = 0; y < a.height(); ++y)
            for (int x = 0; x < a.width(); ++x)
                if (v.lateral_mask(x, y) != 0.0) {
                    ++count;
                    for (int c = 0; c < a.channels(); ++c)
                        se += (a(x, y, c) - v.rgb(x, y, c)) * (a(x, y, c) - v.rgb(x, y, c));
                }
        if (count == 0)
            continue;
        out.pixels += count;
        ssim_sum += metrics::ssim(a, v.rgb, {}, &v.lateral_mask);
        ++ssim_views;
    }
    if (out.pixels == 0)
        throw MetricError("reprojection_consistency: no lateral pixels");
    const double mse = se / (static_cast<double>(out.pixels) * sources[0].channels());
    out.psnr = mse == 0.0 ? metrics::kPsnrIdentical : 10.0 * std::log10(1.0 / mse);
    out.ssim = ssim_sum / ssim_views;
    return out;
}

std::vector<std::filesystem::path> write_atlas(const std::filesystem::path& dir, const BakeResult& r)
{
    using nlohmann::json;
    const auto png = dir / "atlas.png", table = dir / "charts.json";
    io::write_png(png, io::quantize_raster(r.atlas, {8, 0.0, 1.0}));
    json charts = json::array();
    auto v3 = [](const Vec3& v) { return json::array({v.x, v.y, v.z}); };
    for (const Chart& c : r.layout.charts)
        charts.push_back({{"faceId", c.faces},
                          {"uvRect", {c.x, c.y, c.w, c.h}},
                          {"worldBasis",
                           {{"corner", v3(c.corner)},
                            {"s", v3(c.s)},
                            {"t", v3(c.t)},
                            {"normal", v3(c.normal)},
                            {"width_m", c.width_m},
                            {"height_m", c.height_m}}}});
    io::write_text(table, json{{"size", r.layout.size},
                               {"baked", r.baked},
                               {"unseen", r.unseen},
                               {"charts", charts}}
                              .dump(2));
    return {png, table};
}

} // namespace strata::bake

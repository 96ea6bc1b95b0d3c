#include "strata/qa/qa.hpp"

#include "strata/core/errors.hpp"
#include "strata/io/files.hpp"
#include "strata/multiview/bundle.hpp"
#include "strata/multiview/rasterize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace strata::qa {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFlatSlopeDeg = 2.0;
constexpr double kSteepSlopeDeg = 15.0;
constexpr double kFlatReliefM = 1.0;

std::string label_of(int k)
{
    std::string s;
    for (++k; k > 0; k = (k - 1) / 26)
        s.insert(s.begin(), static_cast<char>('A' + (k - 1) % 26));
    return s;
}

int reflect(int i, int n)
{
    if (n == 1)
        return 0;
    if (i < 0)
        i = -i;
    if (i > n - 1)
        i = 2 * (n - 1) - i;
    return std::clamp(i, 0, n - 1);
}

// Point reflection about the border sample keeps linear trends (and any
// monotone profile) intact, so a symmetric-window median of a monotone
// slope returns the slope itself right up to the edge.
double extended(const RasterGrid& h, int x, int y)
{
    const int W = h.width(), H = h.height();
    if (x < 0 || x >= W) {
        const int e = x < 0 ? 0 : W - 1;
        return 2.0 * extended(h, e, y) - extended(h, reflect(x, W), y);
    }
    if (y < 0 || y >= H) {
        const int e = y < 0 ? 0 : H - 1;
        return 2.0 * h(x, e) - h(x, reflect(y, H));
    }
    return h(x, y);
}

std::string fmt_number(double v)
{
    return std::to_string(static_cast<long long>(std::llround(v)));
}

std::string join(const std::vector<std::string>& parts, const char* sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i)
        out += (i ? sep : "") + parts[i];
    return out;
}

const RegionStats& region(const SceneGroundTruth& gt, const std::string& name)
{
    for (const auto& r : gt.regions)
        if (r.name == name)
            return r;
    throw ContractError("qa: missing region " + name);
}

const ViewOrdering& ordering(const SceneGroundTruth& gt, int view)
{
    for (const auto& o : gt.orderings)
        if (o.view == view)
            return o;
    throw ContractError("qa: no ordering for view " + std::to_string(view));
}

bool is_visible(const ViewOrdering& o, int c)
{
    return std::find(o.visible.begin(), o.visible.end(), c) != o.visible.end();
}

TerrainClass classify_terrain(double relief, double mean_slope, double flat_frac, double steep_frac)
{
    if (relief < kFlatReliefM)
        return TerrainClass::Flat;
    if (flat_frac >= 0.4 && steep_frac >= 0.1)
        return TerrainClass::Stepped;
    if (mean_slope >= kSteepSlopeDeg)
        return TerrainClass::Steep;
    return TerrainClass::Gentle;
}

} // namespace

const char* terrain_name(TerrainClass c) noexcept
{
    switch (c) {
    case TerrainClass::Flat: return "flat";
    case TerrainClass::Gentle: return "gently sloping";
    case TerrainClass::Stepped: return "stepped";
    case TerrainClass::Steep: return "steep";
    }
    return "?";
}

const char* task_name(Task t) noexcept
{
    switch (t) {
    case Task::Spatial: return "spatial";
    case Task::Morphology: return "morphology";
    case Task::Counting: return "counting";
    case Task::Geometry: return "geometry";
    case Task::Caption: return "caption";
    }
    return "?";
}

RasterGrid terrain_median(const RasterGrid& h)
{
    if (h.empty() || h.channels() != 1)
        throw ContractError("terrain_median: need a non-empty single-channel raster");
    const int W = h.width(), H = h.height(), r = kTerrainWindow;
    const int PW = W + 2 * r, PH = H + 2 * r;
    std::vector<double> pad(static_cast<std::size_t>(PW) * PH);
    for (int y = 0; y < PH; ++y)
        for (int x = 0; x < PW; ++x)
            pad[static_cast<std::size_t>(y) * PW + x] = extended(h, x - r, y - r);

    RasterGrid out(W, H, 1, h.gsd(), h.anchor());
    const std::size_t n = static_cast<std::size_t>(2 * r + 1) * (2 * r + 1);
    std::vector<double> win(n);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            std::size_t k = 0;
            for (int dy = 0; dy <= 2 * r; ++dy) {
                const double* row = &pad[static_cast<std::size_t>(y + dy) * PW + x];
                for (int dx = 0; dx <= 2 * r; ++dx)
                    win[k++] = row[dx];
            }
            std::nth_element(win.begin(), win.begin() + n / 2, win.end());
            out(x, y) = win[n / 2];
        }
    return out;
}

SceneGroundTruth extract_ground_truth(const TexturedMesh& mesh, const RasterGrid& hm,
                                      std::span<const CameraView> views, double object_threshold)
{
    if (hm.empty() || hm.channels() != 1)
        throw ContractError("extract_ground_truth: need a single-channel height map");
    if (!(object_threshold > 0.0))
        throw ContractError("extract_ground_truth: object threshold must be positive");
    for (double v : hm.data())
        if (!std::isfinite(v))
            throw ContractError("extract_ground_truth: height map has non-finite samples");
    (void)mesh;

    SceneGroundTruth gt;
    gt.object_threshold = object_threshold;
    const int W = hm.width(), H = hm.height();
    const double g = hm.gsd();

    auto stats = [&](const std::string& name, int x0, int y0, int x1, int y1) {
        RegionStats s{name, kInf, 0.0, -kInf};
        double sum = 0.0;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                s.min_m = std::min(s.min_m, hm(x, y));
                s.max_m = std::max(s.max_m, hm(x, y));
                sum += hm(x, y);
            }
        const long n = static_cast<long>(x1 - x0) * (y1 - y0);
        if (n == 0)
            s.min_m = s.max_m = 0.0;
        s.mean_m = n ? sum / static_cast<double>(n) : 0.0;
        return s;
    };
    gt.regions = {stats("all", 0, 0, W, H), stats("north", 0, 0, W, H / 2), stats("south", 0, H / 2, W, H),
                  stats("west", 0, 0, W / 2, H), stats("east", W / 2, 0, W, H)};

    const RasterGrid terrain = terrain_median(hm);

    // Components in raster order of their first pixel.
    std::vector<int> label(static_cast<std::size_t>(W) * H, -1);
    auto raised = [&](int x, int y) { return hm(x, y) - terrain(x, y) > object_threshold; };
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (label[y * W + x] >= 0 || !raised(x, y))
                continue;
            const int id = static_cast<int>(gt.components.size());
            Component c;
            c.label = label_of(id);
            c.height_m = -kInf;
            c.top_m = -kInf;
            double sx = 0.0, sy = 0.0, sg = 0.0;
            label[y * W + x] = id;
            stack.assign(1, {x, y});
            while (!stack.empty()) {
                const auto [px, py] = stack.back();
                stack.pop_back();
                ++c.pixels;
                const Vec2 p = hm.pixel_center(px, py);
                sx += p.x;
                sy += p.y;
                sg += terrain(px, py);
                c.height_m = std::max(c.height_m, hm(px, py) - terrain(px, py));
                c.top_m = std::max(c.top_m, hm(px, py));
                const int nb[4][2] = {{px + 1, py}, {px - 1, py}, {px, py + 1}, {px, py - 1}};
                for (const auto& q : nb)
                    if (q[0] >= 0 && q[0] < W && q[1] >= 0 && q[1] < H && label[q[1] * W + q[0]] < 0 &&
                        raised(q[0], q[1])) {
                        label[q[1] * W + q[0]] = id;
                        stack.push_back({q[0], q[1]});
                    }
            }
            c.area_m2 = c.pixels * g * g;
            c.centroid = {sx / c.pixels, sy / c.pixels};
            c.ground_m = sg / c.pixels;
            gt.components.push_back(c);
        }

    // Terrain statistics on the median surface.
    double tmin = kInf, tmax = -kInf, slope_sum = 0.0;
    long flat = 0, steep = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            tmin = std::min(tmin, terrain(x, y));
            tmax = std::max(tmax, terrain(x, y));
            const int xl = std::max(x - 1, 0), xr = std::min(x + 1, W - 1);
            const int yu = std::max(y - 1, 0), yd = std::min(y + 1, H - 1);
            const double gx = xr > xl ? (terrain(xr, y) - terrain(xl, y)) / ((xr - xl) * g) : 0.0;
            const double gy = yd > yu ? (terrain(x, yd) - terrain(x, yu)) / ((yd - yu) * g) : 0.0;
            const double deg = std::atan(std::hypot(gx, gy)) * 180.0 / std::numbers::pi;
            slope_sum += deg;
            flat += deg < kFlatSlopeDeg;
            steep += deg > kSteepSlopeDeg;
        }
    const double npx = static_cast<double>(W) * H;
    gt.terrain_relief_m = tmax - tmin;
    gt.terrain_mean_slope_deg = slope_sum / npx;
    gt.terrain = classify_terrain(gt.terrain_relief_m, gt.terrain_mean_slope_deg, flat / npx, steep / npx);

    const int nc = static_cast<int>(gt.components.size());
    for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) {
            const double d = gt.components[a].top_m - gt.components[b].top_m;
            if (d > gt.tie_tolerance)
                gt.relations.push_back({Relation::Kind::HigherThan, a, b, -1, d});
        }

    for (const CameraView& v : views) {
        ViewOrdering o;
        o.view = v.index;
        o.depth.assign(nc, kInf);
        for (int c = 0; c < nc; ++c) {
            const Component& k = gt.components[c];
            const Vec3 p{k.centroid.x, k.centroid.y, k.ground_m + 0.5 * k.height_m};
            if (const auto pr = project_point(p, v.intrinsics, v.pose))
                o.depth[c] = pr->depth;
        }
        for (int c = 0; c < nc; ++c)
            if (std::isfinite(o.depth[c]))
                o.near_to_far.push_back(c);
        std::stable_sort(o.near_to_far.begin(), o.near_to_far.end(),
                         [&](int a, int b) { return o.depth[a] < o.depth[b]; });

        // A component is visible when some pixel's front surface lies over
        // its footprint, raised at least half the threshold above terrain.
        std::vector<char> seen(nc, 0);
        if (nc > 0 && !v.world_pos.empty() && !v.depth.empty())
            for (int y = 0; y < v.depth.height(); ++y)
                for (int x = 0; x < v.depth.width(); ++x) {
                    if (!std::isfinite(v.depth(x, y)))
                        continue;
                    const Vec3 w{v.world_pos(x, y, 0), v.world_pos(x, y, 1), v.world_pos(x, y, 2)};
                    const int i = static_cast<int>(std::floor((w.x - hm.anchor().x) / g));
                    const int j = static_cast<int>(std::floor((hm.anchor().y - w.y) / g));
                    if (i < 0 || i >= W || j < 0 || j >= H)
                        continue;
                    const int c = label[j * W + i];
                    if (c >= 0 && w.z > terrain(i, j) + 0.5 * object_threshold)
                        seen[c] = 1;
                }
        for (int c = 0; c < nc; ++c)
            if (seen[c])
                o.visible.push_back(c);

        for (int a = 0; a < nc; ++a)
            for (int b = 0; b < nc; ++b) {
                const double d = o.depth[b] - o.depth[a];
                if (std::isfinite(o.depth[a]) && std::isfinite(o.depth[b]) && d > gt.tie_tolerance)
                    gt.relations.push_back({Relation::Kind::NearerThan, a, b, v.index, d});
            }
        gt.orderings.push_back(std::move(o));
    }
    return gt;
}

json SceneGroundTruth::to_json() const
{
    json j;
    j["objectThreshold"] = object_threshold;
    j["tieTolerance"] = tie_tolerance;
    for (const auto& r : regions)
        j["regions"].push_back({{"name", r.name}, {"min", r.min_m}, {"mean", r.mean_m}, {"max", r.max_m}});
    j["components"] = json::array();
    for (const auto& c : components)
        j["components"].push_back({{"label", c.label},
                                   {"pixels", c.pixels},
                                   {"area_m2", c.area_m2},
                                   {"centroid", {c.centroid.x, c.centroid.y}},
                                   {"ground_m", c.ground_m},
                                   {"height_m", c.height_m},
                                   {"top_m", c.top_m}});
    j["orderings"] = json::array();
    for (const auto& o : orderings) {
        json depth = json::array();
        for (double d : o.depth)
            depth.push_back(std::isfinite(d) ? json(d) : json(nullptr));
        j["orderings"].push_back(
            {{"view", o.view}, {"nearToFar", o.near_to_far}, {"depth", depth}, {"visible", o.visible}});
    }
    j["relations"] = json::array();
    for (const auto& r : relations)
        j["relations"].push_back({{"kind", r.kind == Relation::Kind::HigherThan ? "higher-than" : "nearer-than"},
                                  {"a", r.a},
                                  {"b", r.b},
                                  {"view", r.view},
                                  {"margin", r.margin}});
    j["terrain"] = {{"class", terrain_name(terrain)},
                    {"relief_m", terrain_relief_m},
                    {"meanSlopeDeg", terrain_mean_slope_deg}};
    return j;
}

json QARecord::to_json() const
{
    return {{"image", image},   {"view", view},     {"task", task_name(task)}, {"template", template_id},
            {"params", params}, {"question", question}, {"answer", answer},   {"format", format},
            {"provenance", provenance}};
}

// ---------------------------------------------------------------------------
// Templates. Each one is a pair: `pick` chooses arguments from the ground
// truth (nullopt when the template does not apply), `answer` recomputes the
// answer from arguments alone. evaluate() only uses `answer`, which is what
// makes the closed-loop check meaningful.

namespace {

struct Draft {
    json params;
    std::string question;
    std::string format;
    std::vector<std::string> provenance;
};

using Rng = std::mt19937_64;

template <class T>
const T& pick_one(const std::vector<T>& v, Rng& rng)
{
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

int comp_index(const SceneGroundTruth& gt, const std::string& label)
{
    for (std::size_t i = 0; i < gt.components.size(); ++i)
        if (gt.components[i].label == label)
            return static_cast<int>(i);
    throw ContractError("qa: unknown structure " + label);
}

std::string cref(int c, const char* field) { return "components[" + std::to_string(c) + "]." + field; }

// spatial ------------------------------------------------------------------

std::optional<Draft> pick_nearer(const SceneGroundTruth& gt, int view, Rng& rng)
{
    const ViewOrdering& o = ordering(gt, view);
    std::vector<std::pair<int, int>> pairs;
    for (const auto& r : gt.relations)
        if (r.kind == Relation::Kind::NearerThan && r.view == view && is_visible(o, r.a) && is_visible(o, r.b))
            pairs.push_back({r.a, r.b});
    if (pairs.empty())
        return std::nullopt;
    auto [a, b] = pick_one(pairs, rng);
    if (rng() & 1)
        std::swap(a, b);
    const std::string la = gt.components[a].label, lb = gt.components[b].label;
    return Draft{{{"x", la}, {"y", lb}},
                 "From this viewpoint, is structure " + la + " nearer to the camera than structure " + lb + "?",
                 "boolean",
                 {"orderings[" + std::to_string(view) + "].depth[" + std::to_string(a) + "]",
                  "orderings[" + std::to_string(view) + "].depth[" + std::to_string(b) + "]"}};
}

std::string answer_nearer(const QARecord& r, const SceneGroundTruth& gt)
{
    const ViewOrdering& o = ordering(gt, r.view);
    const int a = comp_index(gt, r.params.at("x")), b = comp_index(gt, r.params.at("y"));
    return o.depth[b] - o.depth[a] > gt.tie_tolerance ? "yes" : "no";
}

std::optional<Draft> pick_higher(const SceneGroundTruth& gt, int view, Rng& rng)
{
    const ViewOrdering& o = ordering(gt, view);
    std::vector<std::pair<int, int>> pairs;
    for (const auto& r : gt.relations)
        if (r.kind == Relation::Kind::HigherThan && is_visible(o, r.a) && is_visible(o, r.b))
            pairs.push_back({r.a, r.b});
    if (pairs.empty())
        return std::nullopt;
    auto [a, b] = pick_one(pairs, rng);
    if (rng() & 1)
        std::swap(a, b);
    const std::string la = gt.components[a].label, lb = gt.components[b].label;
    return Draft{{{"x", la}, {"y", lb}},
                 "Does the top of structure " + la + " stand higher than the top of structure " + lb + "?",
                 "boolean",
                 {cref(a, "top_m"), cref(b, "top_m")}};
}

std::string answer_higher(const QARecord& r, const SceneGroundTruth& gt)
{
    const int a = comp_index(gt, r.params.at("x")), b = comp_index(gt, r.params.at("y"));
    return gt.components[a].top_m - gt.components[b].top_m > gt.tie_tolerance ? "yes" : "no";
}

std::optional<Draft> pick_north_south(const SceneGroundTruth&, int, Rng&)
{
    return Draft{json::object(), "Is the northern half of the scene higher on average than the southern half?",
                 "boolean", {"regions.north.mean", "regions.south.mean"}};
}

std::string answer_north_south(const QARecord&, const SceneGroundTruth& gt)
{
    return region(gt, "north").mean_m - region(gt, "south").mean_m > gt.tie_tolerance ? "yes" : "no";
}

// morphology ---------------------------------------------------------------

std::optional<Draft> pick_terrain(const SceneGroundTruth&, int, Rng& rng)
{
    std::vector<std::string> options = {terrain_name(TerrainClass::Flat), terrain_name(TerrainClass::Gentle),
                                        terrain_name(TerrainClass::Stepped), terrain_name(TerrainClass::Steep)};
    std::shuffle(options.begin(), options.end(), rng);
    return Draft{{{"options", options}},
                 "Which best describes the terrain: " + options[0] + ", " + options[1] + ", " + options[2] + " or " +
                     options[3] + "?",
                 "choice",
                 {"terrain.class", "terrain.relief_m", "terrain.meanSlopeDeg"}};
}

std::string answer_terrain(const QARecord&, const SceneGroundTruth& gt) { return terrain_name(gt.terrain); }

std::optional<Draft> pick_block(const SceneGroundTruth& gt, int, Rng&)
{
    if (gt.components.empty())
        return std::nullopt;
    return Draft{json::object(), "Do the raised structures form a single continuous block?", "boolean",
                 {"components"}};
}

std::string answer_block(const QARecord&, const SceneGroundTruth& gt)
{
    return gt.components.size() == 1 ? "yes" : "no";
}

// counting -----------------------------------------------------------------

std::optional<Draft> pick_count_visible(const SceneGroundTruth& gt, int view, Rng&)
{
    if (gt.components.empty())
        return std::nullopt;
    return Draft{json::object(), "How many raised structures can be seen in this image?", "number",
                 {"orderings[" + std::to_string(view) + "].visible"}};
}

std::string answer_count_visible(const QARecord& r, const SceneGroundTruth& gt)
{
    return std::to_string(ordering(gt, r.view).visible.size());
}

std::optional<Draft> pick_count_taller(const SceneGroundTruth& gt, int, Rng& rng)
{
    if (gt.components.empty())
        return std::nullopt;
    // Thresholds at least a tie tolerance away from every height.
    std::vector<int> candidates;
    for (int t = 1; t <= 100; ++t) {
        bool clear = true;
        for (const auto& c : gt.components)
            clear = clear && std::fabs(c.height_m - t) > gt.tie_tolerance;
        if (clear)
            candidates.push_back(t);
    }
    const int t = pick_one(candidates, rng);
    return Draft{{{"meters", t}},
                 "How many structures rise more than " + std::to_string(t) + " m above the ground?",
                 "number",
                 {"components[*].height_m"}};
}

std::string answer_count_taller(const QARecord& r, const SceneGroundTruth& gt)
{
    const double t = r.params.at("meters").get<double>();
    return std::to_string(std::count_if(gt.components.begin(), gt.components.end(),
                                        [&](const Component& c) { return c.height_m > t; }));
}

std::optional<Draft> pick_count_halves(const SceneGroundTruth&, int, Rng&)
{
    return Draft{json::object(),
                 "How many of the four half-scenes (north, south, east, west) sit more than half a meter above the "
                 "scene's mean elevation?",
                 "number",
                 {"regions"}};
}

std::string answer_count_halves(const QARecord&, const SceneGroundTruth& gt)
{
    const double mean = region(gt, "all").mean_m;
    int n = 0;
    for (const char* h : {"north", "south", "east", "west"})
        n += region(gt, h).mean_m - mean > gt.tie_tolerance;
    return std::to_string(n);
}

// geometry -----------------------------------------------------------------

std::optional<Draft> pick_taller(const SceneGroundTruth& gt, int, Rng& rng)
{
    std::vector<std::pair<int, int>> pairs;
    const int n = static_cast<int>(gt.components.size());
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (std::fabs(gt.components[a].height_m - gt.components[b].height_m) > gt.tie_tolerance)
                pairs.push_back({a, b});
    if (pairs.empty())
        return std::nullopt;
    const auto [a, b] = pick_one(pairs, rng);
    const std::string la = gt.components[a].label, lb = gt.components[b].label;
    return Draft{{{"options", {la, lb}}},
                 "Which structure is taller, " + la + " or " + lb + "?",
                 "choice",
                 {cref(a, "height_m"), cref(b, "height_m")}};
}

std::string answer_taller(const QARecord& r, const SceneGroundTruth& gt)
{
    const auto& opt = r.params.at("options");
    const int a = comp_index(gt, opt.at(0)), b = comp_index(gt, opt.at(1));
    return gt.components[a].height_m > gt.components[b].height_m ? gt.components[a].label : gt.components[b].label;
}

std::optional<Draft> pick_height_of(const SceneGroundTruth& gt, int, Rng& rng)
{
    std::vector<int> ok;
    for (int c = 0; c < static_cast<int>(gt.components.size()); ++c) {
        const double h = gt.components[c].height_m;
        if (std::fabs(h - std::floor(h) - 0.5) > 0.05) // away from rounding ties
            ok.push_back(c);
    }
    if (ok.empty())
        return std::nullopt;
    const int c = pick_one(ok, rng);
    return Draft{{{"x", gt.components[c].label}},
                 "How tall is structure " + gt.components[c].label + " above the ground, to the nearest meter?",
                 "number",
                 {cref(c, "height_m")}};
}

std::string answer_height_of(const QARecord& r, const SceneGroundTruth& gt)
{
    return fmt_number(gt.components[comp_index(gt, r.params.at("x"))].height_m);
}

std::optional<Draft> pick_depth_order(const SceneGroundTruth& gt, int view, Rng&)
{
    const ViewOrdering& o = ordering(gt, view);
    std::vector<int> seq;
    for (int c : o.near_to_far)
        if (is_visible(o, c))
            seq.push_back(c);
    if (seq.size() < 2)
        return std::nullopt;
    for (std::size_t i = 1; i < seq.size(); ++i)
        if (o.depth[seq[i]] - o.depth[seq[i - 1]] <= gt.tie_tolerance)
            return std::nullopt;
    return Draft{json::object(), "List the visible structures from nearest to farthest.", "list",
                 {"orderings[" + std::to_string(view) + "].nearToFar"}};
}

std::string answer_depth_order(const QARecord& r, const SceneGroundTruth& gt)
{
    const ViewOrdering& o = ordering(gt, r.view);
    std::vector<std::string> out;
    for (int c : o.near_to_far)
        if (is_visible(o, c))
            out.push_back(gt.components[c].label);
    return join(out, ", ");
}

std::optional<Draft> pick_relief(const SceneGroundTruth&, int, Rng&)
{
    return Draft{json::object(), "What is the elevation range of the scene, to the nearest meter?", "number",
                 {"regions.all.min", "regions.all.max"}};
}

std::string answer_relief(const QARecord&, const SceneGroundTruth& gt)
{
    const RegionStats& a = region(gt, "all");
    return fmt_number(a.max_m - a.min_m);
}

// caption ------------------------------------------------------------------

std::optional<Draft> pick_caption(const SceneGroundTruth& gt, int, Rng&)
{
    return Draft{json::object(), "Describe the scene in one sentence.", "text",
                 {"terrain.class", "components", gt.components.empty() ? "regions.all" : "components[*].height_m"}};
}

std::string answer_caption(const QARecord&, const SceneGroundTruth& gt)
{
    std::ostringstream s;
    const std::size_t n = gt.components.size();
    s << "A " << terrain_name(gt.terrain) << " scene with ";
    if (n == 0) {
        const RegionStats& a = region(gt, "all");
        s << "no raised structures and about " << fmt_number(a.max_m - a.min_m) << " m of relief.";
        return s.str();
    }
    std::size_t tallest = 0;
    for (std::size_t c = 1; c < n; ++c)
        if (gt.components[c].height_m > gt.components[tallest].height_m)
            tallest = c;
    s << n << (n == 1 ? " raised structure" : " raised structures") << "; the tallest, "
      << gt.components[tallest].label << ", rises about " << fmt_number(gt.components[tallest].height_m) << " m.";
    return s.str();
}

struct Template {
    const char* id;
    Task task;
    bool fallback;
    std::optional<Draft> (*pick)(const SceneGroundTruth&, int, Rng&);
    std::string (*answer)(const QARecord&, const SceneGroundTruth&);
};

const Template kTemplates[] = {
    {"spatial.nearer", Task::Spatial, false, pick_nearer, answer_nearer},
    {"spatial.higher", Task::Spatial, false, pick_higher, answer_higher},
    {"spatial.north_south", Task::Spatial, true, pick_north_south, answer_north_south},
    {"morphology.block", Task::Morphology, false, pick_block, answer_block},
    {"morphology.terrain", Task::Morphology, true, pick_terrain, answer_terrain},
    {"counting.visible", Task::Counting, false, pick_count_visible, answer_count_visible},
    {"counting.taller", Task::Counting, false, pick_count_taller, answer_count_taller},
    {"counting.halves", Task::Counting, true, pick_count_halves, answer_count_halves},
    {"geometry.taller", Task::Geometry, false, pick_taller, answer_taller},
    {"geometry.height", Task::Geometry, false, pick_height_of, answer_height_of},
    {"geometry.depth_order", Task::Geometry, false, pick_depth_order, answer_depth_order},
    {"geometry.relief", Task::Geometry, true, pick_relief, answer_relief},
    {"caption.summary", Task::Caption, true, pick_caption, answer_caption},
};

const Template& find_template(const std::string& id)
{
    for (const auto& t : kTemplates)
        if (id == t.id)
            return t;
    throw ContractError("qa: unknown template " + id);
}

Rng image_rng(std::uint64_t seed, const std::string& image)
{
    std::vector<std::uint32_t> words = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (unsigned char ch : image)
        words.push_back(ch);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

} // namespace

std::vector<QARecord> derive_qa(const SceneGroundTruth& gt, const std::string& image, int view, std::uint64_t seed)
{
    (void)ordering(gt, view);
    Rng rng = image_rng(seed, image);
    std::vector<QARecord> out;
    for (Task task : kTasks) {
        std::vector<std::pair<const Template*, Draft>> primary;
        const Template* fallback = nullptr;
        for (const auto& t : kTemplates) {
            if (t.task != task)
                continue;
            if (t.fallback) {
                fallback = &t;
                continue;
            }
            if (auto d = t.pick(gt, view, rng))
                primary.emplace_back(&t, std::move(*d));
        }
        const Template* chosen = fallback;
        Draft draft;
        if (!primary.empty()) {
            auto& p = primary[std::uniform_int_distribution<std::size_t>(0, primary.size() - 1)(rng)];
            chosen = p.first;
            draft = std::move(p.second);
        } else {
            draft = *fallback->pick(gt, view, rng);
        }
        QARecord r;
        r.image = image;
        r.view = view;
        r.task = task;
        r.template_id = chosen->id;
        r.params = std::move(draft.params);
        r.question = std::move(draft.question);
        r.format = std::move(draft.format);
        r.provenance = std::move(draft.provenance);
        r.answer = chosen->answer(r, gt);
        out.push_back(std::move(r));
    }
    return out;
}

std::string evaluate(const QARecord& record, const SceneGroundTruth& gt)
{
    return find_template(record.template_id).answer(record, gt);
}

int count_mismatches(std::span<const QARecord> records, const SceneGroundTruth& gt)
{
    int n = 0;
    for (const auto& r : records)
        n += evaluate(r, gt) != r.answer;
    return n;
}

void write_jsonl(const std::filesystem::path& path, std::span<const QARecord> records)
{
    std::string text;
    for (const auto& r : records) {
        text += json{{"image", r.image},   {"task", task_name(r.task)}, {"question", r.question},
                     {"answer", r.answer}, {"format", r.format},        {"provenance", r.provenance}}
                    .dump();
        text += '\n';
    }
    io::write_text(path, text);
}

std::vector<CameraView> render_trajectory(const TexturedMesh& mesh, const multiview::Trajectory& traj,
                                          int image_size)
{
    return multiview::render_views(mesh, multiview::fov_intrinsics(image_size, image_size, 60.0),
                                   multiview::circular_trajectory(traj));
}

RasterGrid scene_height_map(const scenes::Scene& scene)
{
    const int n = static_cast<int>(2 * scenes::kGroundHalf);
    return scenes::height_from_mesh(scene.mesh, n, n, 1.0, {-scenes::kGroundHalf, scenes::kGroundHalf});
}

SceneQA build_scene_qa(const scenes::Scene& scene, int n_views, int image_size, std::uint64_t seed)
{
    SceneQA out;
    out.scene = scene.name;
    const multiview::Trajectory traj = multiview::default_trajectory(scene.mesh, n_views);
    out.views = render_trajectory(scene.mesh, traj, image_size);
    out.gt = extract_ground_truth(scene.mesh, scene_height_map(scene), out.views);
    for (const auto& v : out.views) {
        auto recs = derive_qa(out.gt, scene.name + "/view_" + std::to_string(v.index), v.index, seed);
        out.records.insert(out.records.end(), recs.begin(), recs.end());
    }
    return out;
}

int verify_scene_qa(const scenes::Scene& scene, const SceneQA& qa)
{
    // Fresh renders from the stored cameras; nothing is reused from qa.gt.
    std::vector<CameraView> views;
    for (const auto& v : qa.views) {
        views.push_back(multiview::rasterize(scene.mesh, v.intrinsics, v.pose, v.index));
    }
    const SceneGroundTruth gt = extract_ground_truth(scene.mesh, scene_height_map(scene), views);
    return count_mismatches(qa.records, gt);
}

void write_dataset(const std::filesystem::path& dir, std::span<const SceneQA> scenes)
{
    json manifest;
    manifest["scenes"] = json::array();
    std::map<std::string, int> per_task;
    std::vector<QARecord> all;
    for (const auto& s : scenes) {
        multiview::write_view_bundle(dir / s.scene, s.views);
        io::write_text(dir / s.scene / "ground_truth.json", s.gt.to_json().dump(2));
        manifest["scenes"].push_back({{"name", s.scene},
                                      {"domain", s.gt.components.empty() ? "natural" : "man-made"},
                                      {"views", s.views.size()},
                                      {"records", s.records.size()}});
        for (const auto& r : s.records) {
            ++per_task[task_name(r.task)];
            all.push_back(r);
        }
    }
    write_jsonl(dir / "qa.jsonl", all);
    manifest["records"] = all.size();
    manifest["per_task"] = per_task;
    io::write_text(dir / "manifest.json", manifest.dump(2));
}

} // namespace strata::qa

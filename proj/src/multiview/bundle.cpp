#include "strata/multiview/bundle.hpp"

#include "strata/core/errors.hpp"
#include "strata/io/files.hpp"
#include "strata/io/png.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace strata::multiview {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string stem(int i, const char* what) { return "view_" + std::to_string(i) + "_" + what + ".png"; }

json mat_json(const Mat3& m) { return json(std::vector<double>(m.m.begin(), m.m.end())); }

Mat3 mat_from(const json& j)
{
    Mat3 m;
    for (int i = 0; i < 9; ++i)
        m.m[i] = j.at(i).get<double>();
    return m;
}

} // namespace

std::vector<fs::path> write_view_bundle(const fs::path& dir, const std::vector<CameraView>& views)
{
    double dmax = 0.0;
    for (const auto& v : views)
        for (double d : v.depth.data())
            if (std::isfinite(d))
                dmax = std::max(dmax, d);
    const double scale = dmax > 0.0 ? dmax / 65535.0 : 1.0;

    std::vector<fs::path> files;
    json cams = json::array();
    for (const auto& v : views) {
        const int w = v.intrinsics.width, h = v.intrinsics.height;
        files.push_back(dir / stem(v.index, "rgb"));
        io::write_png(files.back(), io::quantize_raster(v.rgb, {8, 0.0, 1.0}));
        files.push_back(dir / stem(v.index, "mask"));
        io::write_png(files.back(), io::quantize_raster(v.lateral_mask, {8, 0.0, 1.0}));
        io::PngImage depth{w, h, 1, 16, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h, 0)};
        for (std::size_t p = 0; p < depth.samples.size(); ++p) {
            const double d = v.depth.data()[p];
            if (std::isfinite(d))
                depth.samples[p] = static_cast<std::uint16_t>(std::clamp(std::floor(d / scale + 0.5), 1.0, 65535.0));
        }
        files.push_back(dir / stem(v.index, "depth"));
        io::write_png(files.back(), depth);
        cams.push_back({{"index", v.index},
                        {"width", w},
                        {"height", h},
                        {"K", mat_json(v.intrinsics.matrix())},
                        {"R", mat_json(v.pose.R)},
                        {"t", {v.pose.t.x, v.pose.t.y, v.pose.t.z}}});
    }
    files.push_back(dir / "cameras.json");
    io::write_text(files.back(), json{{"depth_scale", scale}, {"views", cams}}.dump(2));
    return files;
}

std::vector<CameraView> read_view_bundle(const fs::path& dir)
{
    const json j = json::parse(io::read_text(dir / "cameras.json"));
    const double scale = j.at("depth_scale").get<double>();
    std::vector<CameraView> out;
    for (const auto& c : j.at("views")) {
        CameraView v;
        v.index = c.at("index").get<int>();
        const Mat3 k = mat_from(c.at("K"));
        v.intrinsics = {k(0, 0), k(1, 1), k(0, 2), k(1, 2), c.at("width").get<int>(), c.at("height").get<int>()};
        v.pose.R = mat_from(c.at("R"));
        v.pose.t = {c.at("t").at(0).get<double>(), c.at("t").at(1).get<double>(), c.at("t").at(2).get<double>()};
        v.rgb = io::dequantize_raster(io::read_png(dir / stem(v.index, "rgb")), {8, 0.0, 1.0}, 1.0, {});
        v.lateral_mask = io::dequantize_raster(io::read_png(dir / stem(v.index, "mask")), {8, 0.0, 1.0}, 1.0, {});
        const io::PngImage depth = io::read_png(dir / stem(v.index, "depth"));
        if (depth.bit_depth != 16 || depth.channels != 1)
            throw IoError("read_view_bundle: depth must be 16-bit single channel");
        v.depth = RasterGrid(depth.width, depth.height, 1);
        for (std::size_t p = 0; p < depth.samples.size(); ++p)
            v.depth.data()[p] = depth.samples[p] == 0 ? std::numeric_limits<double>::infinity()
                                                      : depth.samples[p] * scale;
        v.validate();
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace strata::multiview

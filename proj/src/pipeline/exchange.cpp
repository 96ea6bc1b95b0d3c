#include "strata/pipeline/exchange.hpp"

#include "strata/core/errors.hpp"
#include "strata/io/files.hpp"
#include "strata/io/png.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace strata::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kGlbMagic = 0x46546C67; // "glTF"
constexpr std::uint32_t kChunkJson = 0x4E4F534A;
constexpr std::uint32_t kChunkBin = 0x004E4942;
constexpr int kFloat = 5126;
constexpr int kUnsignedInt = 5125;
constexpr int kArrayBuffer = 34962;
constexpr int kElementArrayBuffer = 34963;

std::vector<std::uint8_t> page_png(const RasterGrid& tex)
{
    if (tex.channels() != 3)
        throw ContractError("export: texture pages must be RGB");
    return io::encode_png(io::quantize_raster(tex, {8, 0.0, 1.0}));
}

RasterGrid png_page(std::span<const std::uint8_t> bytes)
{
    return io::dequantize_raster(io::decode_png(bytes), {8, 0.0, 1.0}, 1.0, {});
}

// Groups of (material key, face indices); key -1 is untextured and sorts last.
std::vector<std::pair<int, std::vector<std::size_t>>> material_groups(const TexturedMesh& m)
{
    std::map<int, std::vector<std::size_t>> by;
    for (std::size_t f = 0; f < m.faces.size(); ++f)
        by[m.face_texture[f] < 0 ? std::numeric_limits<int>::max() : m.face_texture[f]].push_back(f);
    std::vector<std::pair<int, std::vector<std::size_t>>> out;
    for (auto& [k, faces] : by)
        out.push_back({k == std::numeric_limits<int>::max() ? -1 : k, std::move(faces)});
    return out;
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
}

template <class T>
void append_raw(std::vector<std::uint8_t>& bin, const std::vector<T>& v)
{
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    bin.insert(bin.end(), p, p + v.size() * sizeof(T));
    while (bin.size() % 4)
        bin.push_back(0);
}

int component_size(int ct)
{
    switch (ct) {
    case 5120: case 5121: return 1;
    case 5122: case 5123: return 2;
    case 5125: case 5126: return 4;
    }
    return 0;
}

int type_count(const std::string& t)
{
    static const std::map<std::string, int> n = {{"SCALAR", 1}, {"VEC2", 2}, {"VEC3", 3}, {"VEC4", 4},
                                                  {"MAT2", 4},   {"MAT3", 9}, {"MAT4", 16}};
    const auto it = n.find(t);
    return it == n.end() ? 0 : it->second;
}

struct Glb {
    json doc;
    std::span<const std::uint8_t> bin;
};

// Container parse; throws IoError with the first structural problem.
Glb split_glb(std::span<const std::uint8_t> b)
{
    if (b.size() < 20)
        throw IoError("glb: shorter than header plus one chunk");
    if (get_u32(b, 0) != kGlbMagic)
        throw IoError("glb: bad magic");
    if (get_u32(b, 4) != 2)
        throw IoError("glb: container version is not 2");
    if (get_u32(b, 8) != b.size())
        throw IoError("glb: header length differs from byte count");
    const std::uint32_t jlen = get_u32(b, 12);
    if (get_u32(b, 16) != kChunkJson)
        throw IoError("glb: first chunk is not JSON");
    if (jlen % 4 || 20 + std::size_t{jlen} > b.size())
        throw IoError("glb: JSON chunk length invalid");
    Glb g;
    try {
        g.doc = json::parse(b.begin() + 20, b.begin() + 20 + jlen);
    } catch (const json::exception& e) {
        throw IoError(std::string("glb: JSON chunk does not parse: ") + e.what());
    }
    std::size_t at = 20 + jlen;
    if (at < b.size()) {
        if (at + 8 > b.size())
            throw IoError("glb: truncated BIN chunk header");
        const std::uint32_t blen = get_u32(b, at);
        if (get_u32(b, at + 4) != kChunkBin)
            throw IoError("glb: second chunk is not BIN");
        if (blen % 4 || at + 8 + blen != b.size())
            throw IoError("glb: BIN chunk length invalid");
        g.bin = b.subspan(at + 8, blen);
    }
    return g;
}

std::span<const std::uint8_t> view_bytes(const Glb& g, int view)
{
    const json& bv = g.doc.at("bufferViews").at(view);
    const std::size_t off = bv.value("byteOffset", 0), len = bv.at("byteLength");
    return g.bin.subspan(off, len);
}

template <class T>
std::vector<T> read_accessor(const Glb& g, int index, int comps)
{
    const json& a = g.doc.at("accessors").at(index);
    const auto bytes = view_bytes(g, a.at("bufferView"));
    const std::size_t off = a.value("byteOffset", 0), count = a.at("count");
    std::vector<T> out(count * comps);
    std::memcpy(out.data(), bytes.data() + off, out.size() * sizeof(T));
    return out;
}

} // namespace

std::vector<std::size_t> export_face_order(const TexturedMesh& mesh)
{
    std::vector<std::size_t> order;
    for (const auto& [k, faces] : material_groups(mesh))
        order.insert(order.end(), faces.begin(), faces.end());
    return order;
}

std::vector<fs::path> write_obj(const fs::path& dir, const std::string& stem, const TexturedMesh& mesh)
{
    mesh.validate();
    std::vector<fs::path> paths;
    std::ostringstream mtl, obj;
    mtl << "# meters, +Z up\n";
    for (std::size_t p = 0; p < mesh.textures.size(); ++p) {
        const std::string png = stem + "_page" + std::to_string(p) + ".png";
        const auto bytes = page_png(mesh.textures[p]);
        io::write_bytes(dir / png, bytes);
        paths.push_back(dir / png);
        mtl << "newmtl page" << p << "\nKd 1 1 1\nmap_Kd " << png << "\n";
    }
    mtl << "newmtl untextured\nKd 0.5 0.5 0.5\n";

    obj << "# meters, +Z up\nmtllib " << stem << ".mtl\n";
    for (const Vec3& v : mesh.vertices)
        obj << "v " << num(v.x) << ' ' << num(v.y) << ' ' << num(v.z) << '\n';
    std::size_t vt = 0;
    for (const auto& [key, faces] : material_groups(mesh)) {
        if (key < 0) {
            obj << "usemtl untextured\n";
            for (std::size_t f : faces)
                obj << "f " << mesh.faces[f][0] + 1 << ' ' << mesh.faces[f][1] + 1 << ' ' << mesh.faces[f][2] + 1
                    << '\n';
            continue;
        }
        obj << "usemtl page" << key << '\n';
        for (std::size_t f : faces)
            for (int c = 0; c < 3; ++c)
                obj << "vt " << num(mesh.uv[f][c].x) << ' ' << num(1.0 - mesh.uv[f][c].y) << '\n';
        for (std::size_t f : faces) {
            obj << 'f';
            for (int c = 0; c < 3; ++c)
                obj << ' ' << mesh.faces[f][c] + 1 << '/' << ++vt;
            obj << '\n';
        }
    }
    io::write_text(dir / (stem + ".mtl"), mtl.str());
    io::write_text(dir / (stem + ".obj"), obj.str());
    paths.insert(paths.begin(), {dir / (stem + ".obj"), dir / (stem + ".mtl")});
    return paths;
}

TexturedMesh read_obj(const fs::path& path)
{
    std::istringstream in(io::read_text(path));
    TexturedMesh m;
    std::vector<Vec2> vts;
    std::map<std::string, int> material_page;
    int current = -1;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v;
            ls >> v.x >> v.y >> v.z;
            m.vertices.push_back(v);
        } else if (tag == "vt") {
            Vec2 t;
            ls >> t.x >> t.y;
            vts.push_back({t.x, 1.0 - t.y});
        } else if (tag == "mtllib") {
            std::string name;
            ls >> name;
            std::istringstream ms(io::read_text(path.parent_path() / name));
            std::string mline, mat;
            while (std::getline(ms, mline)) {
                std::istringstream mls(mline);
                std::string mt;
                mls >> mt;
                if (mt == "newmtl")
                    mls >> mat;
                else if (mt == "map_Kd") {
                    std::string png;
                    mls >> png;
                    material_page[mat] = static_cast<int>(m.textures.size());
                    m.textures.push_back(png_page(io::read_bytes(path.parent_path() / png)));
                }
            }
        } else if (tag == "usemtl") {
            std::string mat;
            ls >> mat;
            const auto it = material_page.find(mat);
            current = it == material_page.end() ? -1 : it->second;
        } else if (tag == "f") {
            Face f{};
            std::array<Vec2, 3> uv{};
            for (int c = 0; c < 3; ++c) {
                std::string tok;
                if (!(ls >> tok))
                    throw IoError("read_obj: face with fewer than 3 corners");
                const auto slash = tok.find('/');
                f[c] = static_cast<std::uint32_t>(std::stoul(tok.substr(0, slash)) - 1);
                if (slash != std::string::npos) {
                    const std::size_t t = std::stoul(tok.substr(slash + 1)) - 1;
                    if (t >= vts.size())
                        throw IoError("read_obj: vt index out of range");
                    uv[c] = vts[t];
                }
            }
            m.faces.push_back(f);
            m.uv.push_back(uv);
            m.face_texture.push_back(current);
            m.face_class.push_back(FaceClass::Horizontal);
        }
    }
    m.validate();
    return m;
}

std::vector<std::uint8_t> encode_glb(const TexturedMesh& mesh)
{
    mesh.validate();
    const auto box = bounding_box(mesh);
    const Vec3 center{0.5 * (box[0].x + box[1].x), 0.5 * (box[0].y + box[1].y), 0.5 * (box[0].z + box[1].z)};

    json doc;
    doc["asset"] = {{"version", "2.0"}, {"generator", "strata"}, {"extras", {{"up", "+Z"}, {"units", "m"}}}};
    doc["scene"] = 0;
    doc["scenes"] = {{{"nodes", {0}}}};
    const double h = std::sqrt(0.5);
    doc["nodes"] = {{{"name", "z_up_to_y_up"}, {"rotation", {-h, 0.0, 0.0, h}}, {"children", {1}}},
                    {{"name", "mesh"}, {"mesh", 0}, {"translation", {center.x, center.y, center.z}}}};
    doc["bufferViews"] = json::array();
    doc["accessors"] = json::array();
    std::vector<std::uint8_t> bin;

    auto add_view = [&](std::size_t offset, std::size_t length, int target) {
        json v = {{"buffer", 0}, {"byteOffset", offset}, {"byteLength", length}};
        if (target)
            v["target"] = target;
        doc["bufferViews"].push_back(v);
        return static_cast<int>(doc["bufferViews"].size()) - 1;
    };
    auto add_accessor = [&](json a) {
        doc["accessors"].push_back(std::move(a));
        return static_cast<int>(doc["accessors"].size()) - 1;
    };

    json prims = json::array();
    json materials = json::array();
    for (const auto& [key, faces] : material_groups(mesh)) {
        // Split shared vertices by (vertex, uv) so each corner keeps its uv.
        std::map<std::tuple<std::uint32_t, double, double>, std::uint32_t> slot;
        std::vector<float> pos, tex;
        std::vector<std::uint32_t> idx;
        float lo[3] = {std::numeric_limits<float>::max(), std::numeric_limits<float>::max(),
                       std::numeric_limits<float>::max()};
        float hi[3] = {-lo[0], -lo[1], -lo[2]};
        for (std::size_t f : faces)
            for (int c = 0; c < 3; ++c) {
                const std::uint32_t v = mesh.faces[f][c];
                const Vec2 uv = key < 0 ? Vec2{} : mesh.uv[f][c];
                const auto [it, fresh] = slot.try_emplace({v, uv.x, uv.y}, static_cast<std::uint32_t>(pos.size() / 3));
                if (fresh) {
                    const Vec3 p = mesh.vertices[v] - center;
                    const float q[3] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
                    for (int k = 0; k < 3; ++k) {
                        pos.push_back(q[k]);
                        lo[k] = std::min(lo[k], q[k]);
                        hi[k] = std::max(hi[k], q[k]);
                    }
                    if (key >= 0) {
                        tex.push_back(static_cast<float>(uv.x));
                        tex.push_back(static_cast<float>(uv.y));
                    }
                }
                idx.push_back(it->second);
            }
        const std::size_t nv = pos.size() / 3;
        json attrs;
        std::size_t off = bin.size();
        append_raw(bin, pos);
        attrs["POSITION"] = add_accessor({{"bufferView", add_view(off, nv * 12, kArrayBuffer)},
                                          {"componentType", kFloat},
                                          {"count", nv},
                                          {"type", "VEC3"},
                                          {"min", {lo[0], lo[1], lo[2]}},
                                          {"max", {hi[0], hi[1], hi[2]}}});
        if (key >= 0) {
            off = bin.size();
            append_raw(bin, tex);
            attrs["TEXCOORD_0"] = add_accessor({{"bufferView", add_view(off, nv * 8, kArrayBuffer)},
                                                {"componentType", kFloat},
                                                {"count", nv},
                                                {"type", "VEC2"}});
        }
        off = bin.size();
        append_raw(bin, idx);
        const int ia = add_accessor({{"bufferView", add_view(off, idx.size() * 4, kElementArrayBuffer)},
                                     {"componentType", kUnsignedInt},
                                     {"count", idx.size()},
                                     {"type", "SCALAR"}});
        json mat = {{"name", key < 0 ? "untextured" : "page" + std::to_string(key)},
                    {"doubleSided", true},
                    {"pbrMetallicRoughness", {{"metallicFactor", 0.0}, {"roughnessFactor", 1.0}}}};
        if (key >= 0)
            mat["pbrMetallicRoughness"]["baseColorTexture"] = {{"index", key}};
        else
            mat["pbrMetallicRoughness"]["baseColorFactor"] = {0.5, 0.5, 0.5, 1.0};
        materials.push_back(mat);
        prims.push_back({{"attributes", attrs},
                         {"indices", ia},
                         {"material", static_cast<int>(materials.size()) - 1},
                         {"mode", 4}});
    }
    doc["materials"] = materials;
    doc["meshes"] = {{{"name", "scene"}, {"primitives", prims}}};

    if (!mesh.textures.empty()) {
        doc["samplers"] = {{{"magFilter", 9729}, {"minFilter", 9729}, {"wrapS", 33071}, {"wrapT", 33071}}};
        for (std::size_t p = 0; p < mesh.textures.size(); ++p) {
            const auto png = page_png(mesh.textures[p]);
            const std::size_t off = bin.size();
            append_raw(bin, png);
            doc["images"].push_back({{"bufferView", add_view(off, png.size(), 0)}, {"mimeType", "image/png"}});
            doc["textures"].push_back({{"sampler", 0}, {"source", p}});
        }
    }
    doc["buffers"] = {{{"byteLength", bin.size()}}};

    std::string text = doc.dump();
    while (text.size() % 4)
        text.push_back(' ');
    std::vector<std::uint8_t> out;
    put_u32(out, kGlbMagic);
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(12 + 8 + text.size() + 8 + bin.size()));
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    put_u32(out, kChunkJson);
    out.insert(out.end(), text.begin(), text.end());
    put_u32(out, static_cast<std::uint32_t>(bin.size()));
    put_u32(out, kChunkBin);
    out.insert(out.end(), bin.begin(), bin.end());
    return out;
}

void write_glb(const fs::path& path, const TexturedMesh& mesh)
{
    io::write_bytes(path, encode_glb(mesh));
}

TexturedMesh decode_glb(std::span<const std::uint8_t> bytes)
{
    const auto errors = validate_glb(bytes);
    if (!errors.empty())
        throw IoError("decode_glb: " + errors.front());
    const Glb g = split_glb(bytes);
    TexturedMesh m;
    for (const auto& img : g.doc.value("images", json::array()))
        m.textures.push_back(png_page(view_bytes(g, img.at("bufferView"))));
    Vec3 t{};
    for (const auto& node : g.doc.at("nodes"))
        if (node.contains("mesh") && node.contains("translation"))
            t = {node["translation"][0], node["translation"][1], node["translation"][2]};
    const json& mats = g.doc.value("materials", json::array());
    for (const auto& prim : g.doc.at("meshes").at(0).at("primitives")) {
        const json& attrs = prim.at("attributes");
        const auto pos = read_accessor<float>(g, attrs.at("POSITION"), 3);
        const bool textured = attrs.contains("TEXCOORD_0");
        const auto uv = textured ? read_accessor<float>(g, attrs.at("TEXCOORD_0"), 2) : std::vector<float>{};
        const auto idx = read_accessor<std::uint32_t>(g, prim.at("indices"), 1);
        int page = -1;
        if (prim.contains("material")) {
            const json& pbr = mats.at(prim["material"].get<int>()).value("pbrMetallicRoughness", json::object());
            if (pbr.contains("baseColorTexture"))
                page = g.doc.at("textures").at(pbr["baseColorTexture"]["index"].get<int>()).at("source");
        }
        const auto base = static_cast<std::uint32_t>(m.vertices.size());
        for (std::size_t i = 0; i < pos.size(); i += 3)
            m.vertices.push_back({double(pos[i]) + t.x, double(pos[i + 1]) + t.y, double(pos[i + 2]) + t.z});
        for (std::size_t i = 0; i + 2 < idx.size(); i += 3) {
            m.faces.push_back({base + idx[i], base + idx[i + 1], base + idx[i + 2]});
            std::array<Vec2, 3> c{};
            if (textured)
                for (int k = 0; k < 3; ++k)
                    c[k] = {uv[2 * idx[i + k]], uv[2 * idx[i + k] + 1]};
            m.uv.push_back(c);
            m.face_texture.push_back(page);
            m.face_class.push_back(FaceClass::Horizontal);
        }
    }
    m.validate();
    return m;
}

std::vector<std::string> validate_glb(std::span<const std::uint8_t> bytes)
{
    std::vector<std::string> err;
    Glb g;
    try {
        g = split_glb(bytes);
    } catch (const IoError& e) {
        return {e.what()};
    }
    const json& d = g.doc;
    auto fail = [&](const std::string& s) { err.push_back(s); };
    auto count = [&](const char* key) -> std::size_t {
        return d.contains(key) && d[key].is_array() ? d[key].size() : 0;
    };
    auto index_ok = [&](const json& v, const char* key) {
        return v.is_number_integer() && v.get<long long>() >= 0 && static_cast<std::size_t>(v.get<long long>()) < count(key);
    };

    if (!d.contains("asset") || d["asset"].value("version", "") != "2.0")
        fail("asset.version must be \"2.0\"");

    // Buffers: exactly the GLB-stored buffer without a uri.
    if (count("buffers") > 0) {
        const json& b0 = d["buffers"][0];
        if (b0.contains("uri"))
            fail("buffers[0] must not have a uri in a GLB");
        if (!b0.contains("byteLength") || b0["byteLength"].get<std::size_t>() > g.bin.size())
            fail("buffers[0].byteLength exceeds the BIN chunk");
    }
    for (std::size_t i = 0; i < count("bufferViews"); ++i) {
        const json& v = d["bufferViews"][i];
        const std::string at = "bufferViews[" + std::to_string(i) + "]";
        if (!v.contains("buffer") || !index_ok(v["buffer"], "buffers")) {
            fail(at + ".buffer out of range");
            continue;
        }
        const std::size_t off = v.value("byteOffset", 0), len = v.value("byteLength", 0);
        if (len < 1)
            fail(at + ".byteLength must be >= 1");
        if (off + len > d["buffers"][v["buffer"].get<int>()].value("byteLength", std::size_t{0}))
            fail(at + " exceeds its buffer");
        if (v.contains("byteStride") && (v["byteStride"] < 4 || v["byteStride"] > 252 || v["byteStride"].get<int>() % 4))
            fail(at + ".byteStride invalid");
        if (v.contains("target") && v["target"] != kArrayBuffer && v["target"] != kElementArrayBuffer)
            fail(at + ".target invalid");
    }
    for (std::size_t i = 0; i < count("accessors"); ++i) {
        const json& a = d["accessors"][i];
        const std::string at = "accessors[" + std::to_string(i) + "]";
        const int cs = component_size(a.value("componentType", 0));
        const int tc = type_count(a.value("type", ""));
        const std::size_t n = a.value("count", std::size_t{0});
        if (!cs)
            fail(at + ".componentType invalid");
        if (!tc)
            fail(at + ".type invalid");
        if (n < 1)
            fail(at + ".count must be >= 1");
        if (!a.contains("bufferView"))
            continue;
        if (!index_ok(a["bufferView"], "bufferViews")) {
            fail(at + ".bufferView out of range");
            continue;
        }
        if (!cs || !tc)
            continue;
        const json& v = d["bufferViews"][a["bufferView"].get<int>()];
        const std::size_t off = a.value("byteOffset", 0), voff = v.value("byteOffset", 0);
        const std::size_t stride = v.value("byteStride", std::size_t(cs) * tc);
        if ((off + voff) % cs)
            fail(at + " is not aligned to its component size");
        if (n && off + stride * (n - 1) + std::size_t(cs) * tc > v.value("byteLength", std::size_t{0}))
            fail(at + " exceeds its bufferView");
        if (a.contains("min") != a.contains("max") ||
            (a.contains("min") && (a["min"].size() != std::size_t(tc) || a["max"].size() != std::size_t(tc))))
            fail(at + " min/max malformed");
    }
    auto accessor_count = [&](const json& ref) -> std::size_t {
        return index_ok(ref, "accessors") ? d["accessors"][ref.get<int>()].value("count", std::size_t{0}) : 0;
    };
    for (std::size_t mi = 0; mi < count("meshes"); ++mi) {
        const json& mesh = d["meshes"][mi];
        if (!mesh.contains("primitives") || mesh["primitives"].empty())
            fail("meshes[" + std::to_string(mi) + "] has no primitives");
        for (std::size_t pi = 0; mesh.contains("primitives") && pi < mesh["primitives"].size(); ++pi) {
            const json& p = mesh["primitives"][pi];
            const std::string at = "meshes[" + std::to_string(mi) + "].primitives[" + std::to_string(pi) + "]";
            if (!p.contains("attributes") || !p["attributes"].contains("POSITION")) {
                fail(at + " lacks POSITION");
                continue;
            }
            std::size_t nv = 0;
            for (const auto& [name, ref] : p["attributes"].items()) {
                if (!index_ok(ref, "accessors")) {
                    fail(at + ".attributes." + name + " out of range");
                    continue;
                }
                const std::size_t c = accessor_count(ref);
                if (nv && c != nv)
                    fail(at + " attribute counts differ");
                nv = c;
            }
            const json& pa = index_ok(p["attributes"]["POSITION"], "accessors")
                                 ? d["accessors"][p["attributes"]["POSITION"].get<int>()]
                                 : json::object();
            if (pa.value("componentType", 0) != kFloat || pa.value("type", "") != "VEC3")
                fail(at + " POSITION must be float VEC3");
            if (!pa.contains("min") || !pa.contains("max"))
                fail(at + " POSITION requires min and max");
            if (p.contains("material") && !index_ok(p["material"], "materials"))
                fail(at + ".material out of range");
            if (p.contains("indices")) {
                if (!index_ok(p["indices"], "accessors")) {
                    fail(at + ".indices out of range");
                    continue;
                }
                const json& ia = d["accessors"][p["indices"].get<int>()];
                if (ia.value("type", "") != "SCALAR" ||
                    (ia.value("componentType", 0) != 5121 && ia.value("componentType", 0) != 5123 &&
                     ia.value("componentType", 0) != kUnsignedInt))
                    fail(at + " indices must be unsigned SCALAR");
                if (p.value("mode", 4) == 4 && ia.value("count", 0) % 3)
                    fail(at + " triangle index count is not a multiple of 3");
                if (ia.value("componentType", 0) == kUnsignedInt && err.empty()) {
                    for (std::uint32_t v : read_accessor<std::uint32_t>(g, p["indices"], 1))
                        if (v >= nv) {
                            fail(at + " index exceeds vertex count");
                            break;
                        }
                }
            }
            if (err.empty() && pa.contains("min")) {
                const auto pos = read_accessor<float>(g, p["attributes"]["POSITION"], 3);
                for (std::size_t i = 0; i < pos.size(); ++i) {
                    const int k = static_cast<int>(i % 3);
                    if (pos[i] < pa["min"][k].get<float>() || pos[i] > pa["max"][k].get<float>()) {
                        fail(at + " POSITION outside its min/max");
                        break;
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < count("materials"); ++i) {
        const json& pbr = d["materials"][i].value("pbrMetallicRoughness", json::object());
        if (pbr.contains("baseColorTexture") && !index_ok(pbr["baseColorTexture"].value("index", json(-1)), "textures"))
            fail("materials[" + std::to_string(i) + "] texture index out of range");
    }
    for (std::size_t i = 0; i < count("textures"); ++i) {
        const json& t = d["textures"][i];
        if (t.contains("source") && !index_ok(t["source"], "images"))
            fail("textures[" + std::to_string(i) + "].source out of range");
        if (t.contains("sampler") && !index_ok(t["sampler"], "samplers"))
            fail("textures[" + std::to_string(i) + "].sampler out of range");
    }
    for (std::size_t i = 0; i < count("images"); ++i) {
        const json& im = d["images"][i];
        if (im.contains("bufferView") == im.contains("uri"))
            fail("images[" + std::to_string(i) + "] needs exactly one of uri and bufferView");
        if (im.contains("bufferView")) {
            if (!im.contains("mimeType"))
                fail("images[" + std::to_string(i) + "] with bufferView needs mimeType");
            if (!index_ok(im["bufferView"], "bufferViews"))
                fail("images[" + std::to_string(i) + "].bufferView out of range");
        }
    }
    for (std::size_t i = 0; i < count("nodes"); ++i) {
        const json& n = d["nodes"][i];
        if (n.contains("mesh") && !index_ok(n["mesh"], "meshes"))
            fail("nodes[" + std::to_string(i) + "].mesh out of range");
        for (const auto& c : n.value("children", json::array()))
            if (!index_ok(c, "nodes") || c.get<std::size_t>() == i)
                fail("nodes[" + std::to_string(i) + "] child invalid");
        if (n.contains("rotation")) {
            const json& q = n["rotation"];
            double s = 0.0;
            for (const auto& x : q)
                s += x.get<double>() * x.get<double>();
            if (q.size() != 4 || std::fabs(s - 1.0) > 1e-6)
                fail("nodes[" + std::to_string(i) + "].rotation is not a unit quaternion");
        }
    }
    for (std::size_t i = 0; i < count("scenes"); ++i)
        for (const auto& n : d["scenes"][i].value("nodes", json::array()))
            if (!index_ok(n, "nodes"))
                fail("scenes[" + std::to_string(i) + "] node out of range");
    if (d.contains("scene") && !index_ok(d["scene"], "scenes"))
        fail("scene out of range");
    return err;
}

std::vector<fs::path> export_mesh(const TexturedMesh& mesh, const std::string& format, const fs::path& dir,
                                  const std::string& stem)
{
    if (format == "obj")
        return write_obj(dir, stem, mesh);
    if (format == "glb") {
        write_glb(dir / (stem + ".glb"), mesh);
        return {dir / (stem + ".glb")};
    }
    throw ConfigError("export: unsupported format '" + format + "' (obj, glb)");
}

} // namespace strata::pipeline

#pragma once

#include "strata/core/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace strata::pipeline {

// Faces are written grouped by material: texture pages ascending, then
// untextured faces; original order within a group. Importers return faces
// in that order.
std::vector<std::size_t> export_face_order(const TexturedMesh& mesh);

// <dir>/<stem>.obj, <stem>.mtl and <stem>_page<k>.png per texture page.
// Positions are written with 17 significant digits (exact round trip); vt
// flips v to OBJ's bottom-up convention. Returns the written paths.
std::vector<std::filesystem::path> write_obj(const std::filesystem::path& dir, const std::string& stem,
                                             const TexturedMesh& mesh);
// Reads positions, faces, uvs, materials (face_texture) and map_Kd pages.
TexturedMesh read_obj(const std::filesystem::path& path);

// Binary glTF 2.0. The mesh node carries the bounding-box center as a
// translation and float32 positions relative to it; a parent node rotates
// the +Z-up world into glTF's +Y-up frame. asset.extras records
// {up: "+Z", units: "m"}. Texture pages are embedded as PNG.
std::vector<std::uint8_t> encode_glb(const TexturedMesh& mesh);
void write_glb(const std::filesystem::path& path, const TexturedMesh& mesh);
// Positions come back in the +Z-up world frame (translation applied in
// double, parent rotation not applied).
TexturedMesh decode_glb(std::span<const std::uint8_t> bytes);

// Structural checks against the glTF 2.0 binary container and core schema
// rules: header and chunk layout, index ranges, accessor bounds, alignment,
// POSITION min/max, index values. Empty result means valid.
std::vector<std::string> validate_glb(std::span<const std::uint8_t> bytes);

// format in {"obj", "glb"}; throws ConfigError otherwise. Returns paths.
std::vector<std::filesystem::path> export_mesh(const TexturedMesh& mesh, const std::string& format,
                                               const std::filesystem::path& dir, const std::string& stem);

} // namespace strata::pipeline

#pragma once

#include "spectraforge/geometry.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace spectraforge {

/// Reads an ASCII OFF or OBJ triangle mesh; the format is chosen by extension.
/// Polygons with more than three corners are fan-triangulated.
Mesh load_mesh(const std::filesystem::path& path);
Mesh parse_off(std::string_view text);
Mesh parse_obj(std::string_view text);

void save_mesh(const Mesh& mesh, const std::filesystem::path& path);
std::string format_off(const Mesh& mesh);

/// XYZ (one point per line) or OBJ with `v` records only.
PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// JSON array or whitespace separated integer list.
Region load_region(const std::filesystem::path& path, Index num_vertices, std::string label = "");
Region parse_region(std::string_view text, Index num_vertices, std::string label = "R");
void save_region(const Region& region, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace spectraforge

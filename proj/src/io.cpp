#include "spectraforge/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace spectraforge {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Splits text into lines, stripping '#' comments and surrounding blanks.
struct Line {
  int number;
  std::string text;
};

std::vector<Line> content_lines(std::string_view text) {
  std::vector<Line> out;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string line(text.substr(pos, end - pos));
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t first = 0;
    while (first < line.size() && std::isspace(static_cast<unsigned char>(line[first]))) ++first;
    if (first < line.size()) out.push_back({number, line.substr(first)});
    pos = end + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Mesh build_mesh(const std::vector<Eigen::Vector3d>& verts, const std::vector<Eigen::Vector3i>& faces,
                const std::vector<int>& face_lines) {
  Vertices V(static_cast<Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<Index>(i)) = verts[i].transpose();
  Faces F(static_cast<Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const auto& f = faces[i];
    const int n = static_cast<int>(verts.size());
    for (int c = 0; c < 3; ++c) {
      if (f(c) < 0 || f(c) >= n) {
        throw ParseError("face references vertex " + std::to_string(f(c)) + " but only " +
                             std::to_string(n) + " vertices exist",
                         face_lines[i]);
      }
    }
    if (f(0) == f(1) || f(1) == f(2) || f(0) == f(2)) {
      throw ParseError("degenerate face (" + std::to_string(f(0)) + ", " + std::to_string(f(1)) + ", " +
                           std::to_string(f(2)) + ")",
                       face_lines[i]);
    }
    F.row(static_cast<Index>(i)) = f.transpose();
  }
  return make_mesh(std::move(V), std::move(F));
}

void fan(const std::vector<int>& poly, int line, std::vector<Eigen::Vector3i>& faces, std::vector<int>& lines) {
  for (std::size_t c = 1; c + 1 < poly.size(); ++c) {
    faces.emplace_back(poly[0], poly[c], poly[c + 1]);
    lines.push_back(line);
  }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

Mesh parse_off(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw ParseError("empty OFF file", 0);
  std::size_t cursor = 0;
  std::istringstream header(lines[0].text);
  std::string magic;
  header >> magic;
  if (magic.rfind("OFF", 0) != 0) throw ParseError("missing OFF header", lines[0].number);
  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    ++cursor;
    if (cursor >= lines.size()) throw ParseError("missing OFF counts", lines[0].number);
    std::istringstream counts(lines[cursor].text);
    if (!(counts >> nv >> nf)) throw ParseError("malformed OFF counts", lines[cursor].number);
    counts >> ne;
  } else if (!(header >> nf)) {
    throw ParseError("malformed OFF counts", lines[0].number);
  }
  if (nv < 0 || nf < 0) throw ParseError("negative OFF counts", lines[cursor].number);
  ++cursor;

  std::vector<Eigen::Vector3d> verts;
  verts.reserve(static_cast<std::size_t>(nv));
  for (long i = 0; i < nv; ++i, ++cursor) {
    if (cursor >= lines.size()) throw ParseError("unexpected end of file in vertex block", lines.back().number);
    std::istringstream ls(lines[cursor].text);
    Eigen::Vector3d p;
    if (!(ls >> p(0) >> p(1) >> p(2))) throw ParseError("malformed vertex", lines[cursor].number);
    verts.push_back(p);
  }
  std::vector<Eigen::Vector3i> faces;
  std::vector<int> face_lines;
  for (long i = 0; i < nf; ++i, ++cursor) {
    if (cursor >= lines.size()) throw ParseError("unexpected end of file in face block", lines.back().number);
    std::istringstream ls(lines[cursor].text);
    int count = 0;
    if (!(ls >> count) || count < 3) throw ParseError("malformed face", lines[cursor].number);
    std::vector<int> poly(static_cast<std::size_t>(count));
    for (auto& v : poly) {
      if (!(ls >> v)) throw ParseError("malformed face", lines[cursor].number);
    }
    fan(poly, lines[cursor].number, faces, face_lines);
  }
  return build_mesh(verts, faces, face_lines);
}

namespace {

struct ObjData {
  std::vector<Eigen::Vector3d> verts;
  std::vector<Eigen::Vector3i> faces;
  std::vector<int> face_lines;
};

ObjData parse_obj_records(std::string_view text) {
  ObjData data;
  for (const auto& line : content_lines(text)) {
    std::istringstream ls(line.text);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p(0) >> p(1) >> p(2))) throw ParseError("malformed vertex", line.number);
      data.verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ls >> token) {
        const std::string head = token.substr(0, token.find('/'));
        int idx = 0;
        auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
        if (ec != std::errc() || ptr != head.data() + head.size()) {
          throw ParseError("malformed face index '" + token + "'", line.number);
        }
        if (idx == 0) throw ParseError("OBJ face index 0 is invalid (indices are 1-based)", line.number);
        // negative indices count back from the most recent vertex
        poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(data.verts.size()) + idx);
      }
      if (poly.size() < 3) throw ParseError("face with fewer than 3 vertices", line.number);
      fan(poly, line.number, data.faces, data.face_lines);
    }
  }
  return data;
}

}  // namespace

Mesh parse_obj(std::string_view text) {
  const ObjData data = parse_obj_records(text);
  return build_mesh(data.verts, data.faces, data.face_lines);
}

Mesh load_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  const std::string text = read_text_file(path);
  try {
    if (ext == ".off") return parse_off(text);
    if (ext == ".obj") return parse_obj(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e);
  }
  throw Error("unsupported mesh format '" + ext + "' (expected .off or .obj)");
}

std::string format_off(const Mesh& mesh) {
  std::string out = "OFF\n" + std::to_string(mesh.num_vertices()) + " " + std::to_string(mesh.num_faces()) + " 0\n";
  for (Index i = 0; i < mesh.num_vertices(); ++i) {
    out += format_double(mesh.vertices(i, 0)) + " " + format_double(mesh.vertices(i, 1)) + " " +
           format_double(mesh.vertices(i, 2)) + "\n";
  }
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    out += "3 " + std::to_string(mesh.faces(f, 0)) + " " + std::to_string(mesh.faces(f, 1)) + " " +
           std::to_string(mesh.faces(f, 2)) + "\n";
  }
  return out;
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".off") {
    write_text_file(path, format_off(mesh));
  } else if (ext == ".obj") {
    std::string out;
    for (Index i = 0; i < mesh.num_vertices(); ++i) {
      out += "v " + format_double(mesh.vertices(i, 0)) + " " + format_double(mesh.vertices(i, 1)) + " " +
             format_double(mesh.vertices(i, 2)) + "\n";
    }
    for (Index f = 0; f < mesh.num_faces(); ++f) {
      out += "f " + std::to_string(mesh.faces(f, 0) + 1) + " " + std::to_string(mesh.faces(f, 1) + 1) + " " +
             std::to_string(mesh.faces(f, 2) + 1) + "\n";
    }
    write_text_file(path, out);
  } else {
    throw Error("unsupported mesh format '" + ext + "' (expected .off or .obj)");
  }
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  const std::string text = read_text_file(path);
  std::vector<Eigen::Vector3d> pts;
  if (ext == ".obj") {
    pts = parse_obj_records(text).verts;
  } else if (ext == ".xyz" || ext == ".txt") {
    for (const auto& line : content_lines(text)) {
      std::istringstream ls(line.text);
      Eigen::Vector3d p;
      if (!(ls >> p(0) >> p(1) >> p(2))) throw ParseError(path.string() + ": malformed point", line.number);
      pts.push_back(p);
    }
  } else {
    throw Error("unsupported point cloud format '" + ext + "' (expected .xyz or .obj)");
  }
  Vertices V(static_cast<Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) V.row(static_cast<Index>(i)) = pts[i].transpose();
  return make_point_cloud(std::move(V));
}

void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  const std::string prefix = ext == ".obj" ? "v " : "";
  std::string out;
  for (Index i = 0; i < cloud.num_vertices(); ++i) {
    out += prefix + format_double(cloud.vertices(i, 0)) + " " + format_double(cloud.vertices(i, 1)) + " " +
           format_double(cloud.vertices(i, 2)) + "\n";
  }
  write_text_file(path, out);
}

Region parse_region(std::string_view text, Index num_vertices, std::string label) {
  std::vector<int> indices;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '[') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed region JSON: ") + e.what(), 0);
    }
    for (const auto& v : j) {
      if (!v.is_number_integer()) throw ParseError("region JSON entries must be integers", 0);
      indices.push_back(v.get<int>());
    }
  } else {
    for (const auto& line : content_lines(text)) {
      std::istringstream ls(line.text);
      std::string token;
      while (ls >> token) {
        int idx = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), idx);
        if (ec != std::errc() || ptr != token.data() + token.size()) {
          throw ParseError("malformed region index '" + token + "'", line.number);
        }
        indices.push_back(idx);
      }
    }
  }
  return make_region(std::move(indices), num_vertices, std::move(label));
}

Region load_region(const std::filesystem::path& path, Index num_vertices, std::string label) {
  if (label.empty()) label = path.stem().string();
  return parse_region(read_text_file(path), num_vertices, std::move(label));
}

void save_region(const Region& region, const std::filesystem::path& path) {
  write_text_file(path, nlohmann::json(region.indices).dump() + "\n");
}

}  // namespace spectraforge

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spectraforge {

using Index = Eigen::Index;
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using IndexList = std::vector<int>;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  ParseError(const std::string& context, const ParseError& inner)
      : Error(context + ": " + inner.what()), line_(inner.line_) {}
  int line() const { return line_; }

 private:
  int line_;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Triangle mesh. Construct through make_mesh() to get validation.
struct Mesh {
  Vertices vertices;
  Faces faces;

  Index num_vertices() const { return vertices.rows(); }
  Index num_faces() const { return faces.rows(); }
};

struct PointCloud {
  Vertices vertices;

  Index num_vertices() const { return vertices.rows(); }
};

/// Sorted, duplicate-free vertex subset of a host shape.
struct Region {
  IndexList indices;
  std::string label = "R";

  std::size_t size() const { return indices.size(); }
  bool contains(int v) const;
};

/// Validates indices, degenerate faces and vertex count; throws GeometryError.
Mesh make_mesh(Vertices vertices, Faces faces);
PointCloud make_point_cloud(Vertices vertices);

/// Sorts and deduplicates `indices`, then checks them against `num_vertices`.
Region make_region(std::vector<int> indices, Index num_vertices, std::string label = "R");
Region full_region(Index num_vertices, std::string label = "R");
/// Vertices of the host not in `region`.
Region complement(const Region& region, Index num_vertices);

struct Submesh {
  Mesh mesh;
  IndexList boundary;    ///< submesh indices adjacent to a vertex outside the region
  IndexList vertex_map;  ///< submesh index -> original index
};

/// Keeps the faces whose three vertices lie in `region`. Vertices of the
/// region that touch no surviving face are dropped from the submesh.
Submesh extract_submesh(const Mesh& mesh, const Region& region);

/// One third of the incident triangle areas per vertex.
Eigen::VectorXd vertex_areas(const Mesh& mesh);
double surface_area(const Mesh& mesh);

/// Vertex-to-vertex adjacency lists (sorted) from the face list.
std::vector<IndexList> vertex_adjacency(const Mesh& mesh);

/// Greedy farthest point sampling. The first index is drawn from `seed`.
IndexList farthest_point_sample(const Vertices& points, int count, std::uint64_t seed);

/// Subdivided icosahedron projected onto the unit sphere (10 * 4^level + 2 vertices).
Mesh make_icosphere(int level);

/// Regular right-triangle grid over [0, width] x [0, height] in the z = 0 plane
/// with `nx` by `ny` cells.
Mesh make_grid(int nx, int ny, double width = 1.0, double height = 1.0);

/// Indices of the grid vertices lying on the outer perimeter.
IndexList grid_perimeter(int nx, int ny);

}  // namespace spectraforge

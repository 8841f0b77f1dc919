#include "spectraforge/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <utility>

namespace spectraforge {

bool Region::contains(int v) const {
  return std::binary_search(indices.begin(), indices.end(), v);
}

Mesh make_mesh(Vertices vertices, Faces faces) {
  const Index n = vertices.rows();
  if (!vertices.allFinite()) throw GeometryError("mesh has non-finite vertex coordinates");
  if (faces.rows() > 0 && n < 3) throw GeometryError("mesh with faces needs at least 3 vertices");
  for (Index f = 0; f < faces.rows(); ++f) {
    const int a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
    for (int v : {a, b, c}) {
      if (v < 0 || v >= n) {
        throw GeometryError("face " + std::to_string(f) + " references vertex " + std::to_string(v) +
                            " outside [0, " + std::to_string(n) + ")");
      }
    }
    if (a == b || b == c || a == c) {
      throw GeometryError("degenerate face " + std::to_string(f) + ": (" + std::to_string(a) + ", " +
                          std::to_string(b) + ", " + std::to_string(c) + ")");
    }
  }
  return Mesh{std::move(vertices), std::move(faces)};
}

PointCloud make_point_cloud(Vertices vertices) {
  if (vertices.rows() < 1) throw GeometryError("point cloud is empty");
  if (!vertices.allFinite()) throw GeometryError("point cloud has non-finite coordinates");
  return PointCloud{std::move(vertices)};
}

Region make_region(std::vector<int> indices, Index num_vertices, std::string label) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  if (indices.empty()) throw GeometryError("region '" + label + "' is empty");
  if (indices.front() < 0 || indices.back() >= num_vertices) {
    const int bad = indices.front() < 0 ? indices.front() : indices.back();
    throw GeometryError("region '" + label + "' index " + std::to_string(bad) + " out of range [0, " +
                        std::to_string(num_vertices) + ")");
  }
  return Region{std::move(indices), std::move(label)};
}

Region full_region(Index num_vertices, std::string label) {
  IndexList all(static_cast<std::size_t>(num_vertices));
  for (Index i = 0; i < num_vertices; ++i) all[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return make_region(std::move(all), num_vertices, std::move(label));
}

Region complement(const Region& region, Index num_vertices) {
  IndexList out;
  out.reserve(static_cast<std::size_t>(num_vertices) - region.size());
  std::size_t j = 0;
  for (int v = 0; v < num_vertices; ++v) {
    if (j < region.indices.size() && region.indices[j] == v) {
      ++j;
      continue;
    }
    out.push_back(v);
  }
  return Region{std::move(out), region.label + "^c"};
}

std::vector<IndexList> vertex_adjacency(const Mesh& mesh) {
  std::vector<IndexList> adj(static_cast<std::size_t>(mesh.num_vertices()));
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    for (int e = 0; e < 3; ++e) {
      const int a = mesh.faces(f, e), b = mesh.faces(f, (e + 1) % 3);
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

Submesh extract_submesh(const Mesh& mesh, const Region& region) {
  if (region.indices.empty()) throw GeometryError("cannot extract submesh of an empty region");
  const Index n = mesh.num_vertices();
  std::vector<char> inside(static_cast<std::size_t>(n), 0);
  for (int v : region.indices) inside[v] = 1;

  std::vector<Index> kept_faces;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const auto face = mesh.faces.row(f);
    if (inside[face(0)] && inside[face(1)] && inside[face(2)]) {
      kept_faces.push_back(f);
      used[face(0)] = used[face(1)] = used[face(2)] = 1;
    }
  }
  if (kept_faces.empty()) {
    throw GeometryError("region '" + region.label + "' contains no complete face; submesh is empty");
  }

  std::vector<int> to_sub(static_cast<std::size_t>(n), -1);
  Submesh out;
  for (int v : region.indices) {
    if (!used[v]) continue;
    to_sub[v] = static_cast<int>(out.vertex_map.size());
    out.vertex_map.push_back(v);
  }

  Vertices verts(static_cast<Index>(out.vertex_map.size()), 3);
  for (std::size_t i = 0; i < out.vertex_map.size(); ++i) verts.row(static_cast<Index>(i)) = mesh.vertices.row(out.vertex_map[i]);
  Faces faces(static_cast<Index>(kept_faces.size()), 3);
  for (std::size_t i = 0; i < kept_faces.size(); ++i) {
    for (int c = 0; c < 3; ++c) faces(static_cast<Index>(i), c) = to_sub[mesh.faces(kept_faces[i], c)];
  }
  out.mesh = Mesh{std::move(verts), std::move(faces)};

  const auto adj = vertex_adjacency(mesh);
  for (std::size_t i = 0; i < out.vertex_map.size(); ++i) {
    const int v = out.vertex_map[i];
    const bool touches_outside =
        std::any_of(adj[v].begin(), adj[v].end(), [&](int w) { return !inside[w]; });
    if (touches_outside) out.boundary.push_back(static_cast<int>(i));
  }
  return out;
}

Eigen::VectorXd vertex_areas(const Mesh& mesh) {
  Eigen::VectorXd areas = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    const double third = 0.5 * (b - a).cross(c - a).norm() / 3.0;
    for (int k = 0; k < 3; ++k) areas(mesh.faces(f, k)) += third;
  }
  return areas;
}

double surface_area(const Mesh& mesh) {
  double total = 0.0;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    total += 0.5 * (b - a).cross(c - a).norm();
  }
  return total;
}

IndexList farthest_point_sample(const Vertices& points, int count, std::uint64_t seed) {
  const Index n = points.rows();
  if (count < 0 || count > n) {
    throw GeometryError("cannot sample " + std::to_string(count) + " points from " + std::to_string(n));
  }
  IndexList picked;
  if (count == 0) return picked;
  picked.reserve(static_cast<std::size_t>(count));

  std::mt19937_64 rng(seed);
  int current = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (int s = 0; s < count; ++s) {
    picked.push_back(current);
    dist = dist.cwiseMin((points.rowwise() - points.row(current)).rowwise().squaredNorm());
    Index next = 0;
    dist.maxCoeff(&next);  // first maximum wins, so ties are deterministic
    current = static_cast<int>(next);
  }
  return picked;
}

Mesh make_icosphere(int level) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::Vector3i> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
      {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int id = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f(0), f(1)), bc = mid(f(1), f(2)), ca = mid(f(2), f(0));
      next.emplace_back(f(0), ab, ca);
      next.emplace_back(f(1), bc, ab);
      next.emplace_back(f(2), ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    faces = std::move(next);
  }

  Vertices V(static_cast<Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<Index>(i)) = verts[i].transpose();
  Faces F(static_cast<Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) F.row(static_cast<Index>(i)) = faces[i].transpose();
  return make_mesh(std::move(V), std::move(F));
}

Mesh make_grid(int nx, int ny, double width, double height) {
  if (nx < 1 || ny < 1) throw GeometryError("grid needs at least one cell per side");
  Vertices V((nx + 1) * (ny + 1), 3);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      V.row(j * (nx + 1) + i) << width * i / nx, height * j / ny, 0.0;
    }
  }
  Faces F(2 * nx * ny, 3);
  int f = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = j * (nx + 1) + i, b = a + 1, c = a + nx + 1, d = c + 1;
      F.row(f++) << a, b, d;
      F.row(f++) << a, d, c;
    }
  }
  return make_mesh(std::move(V), std::move(F));
}

IndexList grid_perimeter(int nx, int ny) {
  IndexList out;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      if (i == 0 || j == 0 || i == nx || j == ny) out.push_back(j * (nx + 1) + i);
    }
  }
  return out;
}

}  // namespace spectraforge

#include "spectraforge/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace spectraforge {
namespace {

using Triplet = Eigen::Triplet<double>;

double cotangent(const Eigen::Vector3d& apex, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                 bool& clamped) {
  const Eigen::Vector3d u = a - apex, v = b - apex;
  const double sine = u.cross(v).norm();
  const double value = u.dot(v) / sine;
  if (!std::isfinite(value)) {
    clamped = true;
    return 0.0;
  }
  return value;
}

void validate_region(const Region& region, Index n) {
  if (region.indices.empty()) throw GeometryError("region is empty");
  if (region.indices.back() >= n) throw GeometryError("region index out of range for the operator");
}

}  // namespace

Eigen::MatrixXd SparseOperator::dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd(matrix);
  if (has_low_rank()) {
    Eigen::MatrixXd gram = low_rank * low_rank.transpose();
    d += 0.5 * (gram + gram.transpose());
  }
  return d;
}

std::string to_string(LocalOperator kind) {
  switch (kind) {
    case LocalOperator::PAT: return "pat";
    case LocalOperator::HAM: return "ham";
    case LocalOperator::LMH: return "lmh";
  }
  return "unknown";
}

LocalOperator parse_local_operator(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "pat") return LocalOperator::PAT;
  if (lower == "ham") return LocalOperator::HAM;
  if (lower == "lmh") return LocalOperator::LMH;
  throw Error("unknown local operator '" + name + "' (expected pat, ham or lmh)");
}

OperatorPair cotan_laplacian(const Mesh& mesh) {
  const Index n = mesh.num_vertices();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_faces()) * 12);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);
  int clamped_count = 0;

  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const int idx[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    const Eigen::Vector3d p[3] = {mesh.vertices.row(idx[0]), mesh.vertices.row(idx[1]),
                                  mesh.vertices.row(idx[2])};
    const double third = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm() / 3.0;
    bool clamped = false;
    for (int c = 0; c < 3; ++c) {
      // the angle at corner c is opposite the edge (c+1, c+2)
      const int i = idx[(c + 1) % 3], j = idx[(c + 2) % 3];
      const double w = 0.5 * cotangent(p[c], p[(c + 1) % 3], p[(c + 2) % 3], clamped);
      triplets.emplace_back(i, j, -w);
      triplets.emplace_back(j, i, -w);
      triplets.emplace_back(i, i, w);
      triplets.emplace_back(j, j, w);
      mass(idx[c]) += third;
    }
    if (clamped) ++clamped_count;
  }

  OperatorPair out;
  out.stiffness.matrix.resize(n, n);
  out.stiffness.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.stiffness.matrix.makeCompressed();
  if (clamped_count > 0) {
    out.warnings.push_back(std::to_string(clamped_count) +
                           " zero-area triangle(s): non-finite cotangents clamped to 0");
  }

  const double floor = 1e-12 * std::max(mass.mean(), 1e-300);
  int floored = 0;
  for (Index i = 0; i < n; ++i) {
    if (mass(i) <= floor) {
      mass(i) = floor;
      ++floored;
    }
  }
  if (floored > 0) {
    out.warnings.push_back(std::to_string(floored) + " vertex area(s) were zero; mass floored to " +
                           std::to_string(floor));
  }
  out.mass.diagonal = std::move(mass);
  out.vertex_map.resize(static_cast<std::size_t>(n));
  std::iota(out.vertex_map.begin(), out.vertex_map.end(), 0);
  return out;
}

OperatorPair dirichlet_reduce(const OperatorPair& pair, const IndexList& boundary) {
  const Index n = pair.dimension();
  std::vector<int> keep_map(static_cast<std::size_t>(n), 0);
  for (int b : boundary) {
    if (b < 0 || b >= n) throw GeometryError("boundary index " + std::to_string(b) + " out of range");
    keep_map[b] = -1;
  }
  IndexList interior;
  for (Index i = 0; i < n; ++i) {
    if (keep_map[i] == 0) {
      keep_map[i] = static_cast<int>(interior.size());
      interior.push_back(static_cast<int>(i));
    }
  }
  if (interior.empty()) throw GeometryError("Dirichlet reduction removed every vertex; no interior remains");
  if (interior.size() == static_cast<std::size_t>(n)) return pair;

  const Index m = static_cast<Index>(interior.size());
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(pair.stiffness.matrix.nonZeros()));
  for (Index col = 0; col < pair.stiffness.matrix.outerSize(); ++col) {
    if (keep_map[col] < 0) continue;
    for (SparseMatrix::InnerIterator it(pair.stiffness.matrix, col); it; ++it) {
      if (keep_map[it.row()] < 0) continue;
      triplets.emplace_back(keep_map[it.row()], keep_map[col], it.value());
    }
  }

  OperatorPair out;
  out.stiffness.matrix.resize(m, m);
  out.stiffness.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.stiffness.matrix.makeCompressed();
  out.mass.diagonal.resize(m);
  if (pair.stiffness.has_low_rank()) out.stiffness.low_rank.resize(m, pair.stiffness.low_rank.cols());
  out.vertex_map.resize(interior.size());
  for (Index r = 0; r < m; ++r) {
    const int src = interior[static_cast<std::size_t>(r)];
    out.mass.diagonal(r) = pair.mass.diagonal(src);
    if (pair.stiffness.has_low_rank()) out.stiffness.low_rank.row(r) = pair.stiffness.low_rank.row(src);
    out.vertex_map[static_cast<std::size_t>(r)] = pair.vertex_map[static_cast<std::size_t>(src)];
  }
  out.warnings = pair.warnings;
  return out;
}

OperatorPair pat_operator(const Mesh& mesh, const Region& region) {
  const Submesh sub = extract_submesh(mesh, region);
  OperatorPair local = cotan_laplacian(sub.mesh);
  for (auto& v : local.vertex_map) v = sub.vertex_map[static_cast<std::size_t>(v)];
  return dirichlet_reduce(local, sub.boundary);
}

OperatorPair ham_operator(const OperatorPair& lbo, const Region& region, double tau) {
  if (!(tau >= 0.0)) throw Error("HAM potential must be nonnegative");
  const Index n = lbo.dimension();
  validate_region(region, n);
  Eigen::VectorXd potential = tau * lbo.mass.diagonal;
  for (int v : region.indices) potential(v) = 0.0;

  OperatorPair out = lbo;
  SparseMatrix diag(n, n);
  diag.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Index i = 0; i < n; ++i) diag.insert(i, i) = potential(i);
  out.stiffness.matrix = lbo.stiffness.matrix + diag;
  out.stiffness.matrix.makeCompressed();
  return out;
}

OperatorPair ham_operator(const Mesh& mesh, const Region& region, double tau) {
  return ham_operator(cotan_laplacian(mesh), region, tau);
}

OperatorPair lmh_operator(const OperatorPair& lbo, const Region& region, double tau, double mu,
                          const Eigen::MatrixXd& global_basis) {
  if (!(mu >= 0.0)) throw Error("LMH orthogonality weight must be nonnegative");
  if (global_basis.cols() > 0 && global_basis.rows() != lbo.dimension()) {
    throw GeometryError("LMH basis has " + std::to_string(global_basis.rows()) + " rows but the operator has " +
                        std::to_string(lbo.dimension()));
  }
  OperatorPair out = ham_operator(lbo, region, tau);
  if (mu > 0.0 && global_basis.cols() > 0) {
    out.stiffness.low_rank = std::sqrt(mu) * (lbo.mass.diagonal.asDiagonal() * global_basis);
  } else {
    out.stiffness.low_rank.resize(lbo.dimension(), 0);
  }
  return out;
}

OperatorPair lmh_operator(const Mesh& mesh, const Region& region, double tau, double mu,
                          const Eigen::MatrixXd& global_basis) {
  return lmh_operator(cotan_laplacian(mesh), region, tau, mu, global_basis);
}

double default_potential(const Eigen::VectorXd& global_eigenvalues) {
  if (global_eigenvalues.size() == 0) throw Error("default potential needs at least one eigenvalue");
  return 1e4 * global_eigenvalues.mean();
}

OperatorPair pointcloud_laplacian(const Vertices& points, int k_neighbors) {
  const Index n = points.rows();
  if (k_neighbors < 1 || k_neighbors >= n) {
    throw GeometryError("k_neighbors must lie in [1, n) (n = " + std::to_string(n) + ")");
  }
  const auto k = static_cast<std::size_t>(k_neighbors);

  std::vector<std::vector<std::pair<double, int>>> knn(static_cast<std::size_t>(n));
  double kth_sum = 0.0;
  std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n) - 1);
  for (Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Index j = 0; j < n; ++j) {
      if (j != i) cand[c++] = {(points.row(i) - points.row(j)).squaredNorm(), static_cast<int>(j)};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    knn[i].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
    kth_sum += std::sqrt(knn[i].back().first);
  }

  OperatorPair out;
  // diameter of the enclosing ball about the centroid, invariant under rigid motions
  const Eigen::RowVector3d centroid = points.colwise().mean();
  const double extent = 2.0 * std::sqrt((points.rowwise() - centroid).rowwise().squaredNorm().maxCoeff());
  double sigma = kth_sum / static_cast<double>(n);
  const double sigma_floor = extent > 0.0 ? 1e-9 * extent : 1e-9;
  if (sigma < sigma_floor) {
    sigma = sigma_floor;
    out.warnings.push_back("duplicate points: neighbor scale floored to " + std::to_string(sigma_floor));
  }

  // An edge exists when either endpoint lists the other among its k nearest.
  std::vector<std::pair<int, int>> edges;
  for (Index i = 0; i < n; ++i) {
    for (const auto& nb : knn[i]) edges.emplace_back(std::minmax(static_cast<int>(i), nb.second));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<Triplet> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& [i, j] : edges) {
    const double w = std::exp(-(points.row(i) - points.row(j)).squaredNorm() / (sigma * sigma));
    triplets.emplace_back(i, j, w);
    triplets.emplace_back(j, i, w);
  }
  SparseMatrix weights(n, n);
  weights.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  for (Index col = 0; col < weights.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(weights, col); it; ++it) degree(col) += it.value();
  }
  SparseMatrix deg(n, n);
  deg.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Index i = 0; i < n; ++i) deg.insert(i, i) = degree(i);

  out.stiffness.matrix = deg - weights;
  out.stiffness.matrix.makeCompressed();
  const double unit = extent > 0.0 ? extent * extent / static_cast<double>(n) : 1.0;
  out.mass.diagonal = Eigen::VectorXd::Constant(n, unit);
  out.vertex_map.resize(static_cast<std::size_t>(n));
  std::iota(out.vertex_map.begin(), out.vertex_map.end(), 0);
  return out;
}

void write_matrix_market(std::ostream& out, const SparseMatrix& matrix) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << matrix.rows() << " " << matrix.cols() << " " << matrix.nonZeros() << "\n";
  char buf[64];
  for (Index col = 0; col < matrix.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(matrix, col); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n", static_cast<long>(it.row() + 1),
                    static_cast<long>(col + 1), it.value());
      out << buf;
    }
  }
}

}  // namespace spectraforge

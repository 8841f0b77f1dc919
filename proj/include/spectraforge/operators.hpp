#pragma once

#include "spectraforge/geometry.hpp"

#include <Eigen/SparseCore>

#include <iosfwd>
#include <string>
#include <vector>

namespace spectraforge {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Symmetric stiffness operator `matrix + low_rank * low_rank^T`. The dense
/// low-rank factor is empty except for LMH operators.
struct SparseOperator {
  SparseMatrix matrix;
  Eigen::MatrixXd low_rank;

  Index dimension() const { return matrix.rows(); }
  bool has_low_rank() const { return low_rank.cols() > 0; }
  Eigen::MatrixXd dense() const;

  template <typename Derived>
  Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& x) const {
    Eigen::MatrixXd y = matrix * x;
    if (has_low_rank()) y.noalias() += low_rank * (low_rank.transpose() * x);
    return y;
  }
};

/// Lumped (diagonal) mass.
struct MassMatrix {
  Eigen::VectorXd diagonal;

  Index dimension() const { return diagonal.size(); }
  double total() const { return diagonal.sum(); }
};

/// A generalized eigenproblem pair L phi = lambda M phi. `vertex_map` sends
/// each row of the pair to the vertex of the host shape it stands for.
struct OperatorPair {
  SparseOperator stiffness;
  MassMatrix mass;
  IndexList vertex_map;
  std::vector<std::string> warnings;

  Index dimension() const { return stiffness.dimension(); }
};

enum class LocalOperator { PAT, HAM, LMH };

std::string to_string(LocalOperator kind);
LocalOperator parse_local_operator(const std::string& name);

/// Cotangent stiffness with lumped barycentric mass. Cotangents of
/// zero-area triangles are clamped to zero and reported in `warnings`.
OperatorPair cotan_laplacian(const Mesh& mesh);

/// Deletes the rows and columns of `boundary` (indices into the pair).
OperatorPair dirichlet_reduce(const OperatorPair& pair, const IndexList& boundary);

/// Cut the region out and impose Dirichlet conditions on its boundary ring.
OperatorPair pat_operator(const Mesh& mesh, const Region& region);

/// L + tau * M * V, V the indicator of the vertices outside `region`.
OperatorPair ham_operator(const Mesh& mesh, const Region& region, double tau);
OperatorPair ham_operator(const OperatorPair& lbo, const Region& region, double tau);

/// HAM plus the penalty mu * M Phi Phi^T M on the span of `global_basis`
/// (mass-orthonormal columns, n x basis_size).
OperatorPair lmh_operator(const Mesh& mesh, const Region& region, double tau, double mu,
                          const Eigen::MatrixXd& global_basis);
OperatorPair lmh_operator(const OperatorPair& lbo, const Region& region, double tau, double mu,
                          const Eigen::MatrixXd& global_basis);

/// Default potential strength: 1e4 times the mean of the given eigenvalues
/// (callers pass the first 30 global ones).
double default_potential(const Eigen::VectorXd& global_eigenvalues);

/// Symmetrized k-nearest-neighbor graph Laplacian with Gaussian weights
/// exp(-d^2 / sigma^2), sigma the mean distance to the k-th neighbor, and
/// uniform mass extent^2 / n, extent the diameter of the centroid-centered
/// ball enclosing the points.
OperatorPair pointcloud_laplacian(const Vertices& points, int k_neighbors = 12);

/// Coordinate-format Matrix Market dump of the sparse part (upper and lower triangle).
void write_matrix_market(std::ostream& out, const SparseMatrix& matrix);

}  // namespace spectraforge

#pragma once

#include "spectraforge/operators.hpp"

#include <cstdint>
#include <string>

namespace spectraforge {

/// Eigenvalues in ascending order; eigenvectors (if requested) are
/// mass-orthonormal columns.
struct Spectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  double max_residual = 0.0;  ///< largest normwise backward error over the pairs
  int restarts = 0;

  Index size() const { return eigenvalues.size(); }
  bool has_vectors() const { return eigenvectors.cols() > 0; }
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double achieved) : Error(what), achieved_(achieved) {}
  double achieved_residual() const { return achieved_; }

 private:
  double achieved_;
};

struct EigenOptions {
  int block_size = 6;
  int max_restarts = 500;
  double tolerance = 1e-10;        ///< Ritz residual relative to the Ritz value, shift-inverted space
  double acceptance = 1e-8;        ///< normwise backward error every returned pair must meet
};

/// The `k` smallest eigenpairs of L phi = lambda M phi by shift-invert block
/// Lanczos with thick restarts. The shift sits just below zero
/// (-1e-4 * tr(L)/tr(M)) so the factorization stays definite even with a
/// constant kernel. Deterministic for a fixed seed. Small problems are
/// solved densely.
Spectrum smallest_eigenpairs(const SparseOperator& op, const MassMatrix& mass, int k, bool want_vectors,
                             std::uint64_t seed, const EigenOptions& options = {});
Spectrum smallest_eigenpairs(const OperatorPair& pair, int k, bool want_vectors, std::uint64_t seed,
                             const EigenOptions& options = {});

/// Full spectrum of the pair by dense reduction. Throws past `max_dimension`.
Spectrum dense_eigen_oracle(const SparseOperator& op, const MassMatrix& mass, Index max_dimension = 2000);

/// Normwise backward error ||L x - lambda M x|| / ((||L||_1 + |lambda| ||M||_1) ||x||).
double backward_error(const SparseOperator& op, const MassMatrix& mass, double lambda, const Eigen::VectorXd& x);

/// JSON array of eigenvalues with round-trip precision.
std::string spectrum_to_json(const Spectrum& spectrum);
Eigen::VectorXd spectrum_from_json(const std::string& text);

}  // namespace spectraforge

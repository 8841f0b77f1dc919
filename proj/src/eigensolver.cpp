#include "spectraforge/eigensolver.hpp"

#include "json.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace spectraforge {
namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// x -> M^{1/2} (L + U U^T - sigma M)^{-1} M^{1/2} x, symmetric positive definite.
class ShiftInvert {
 public:
  ShiftInvert(const SparseOperator& op, const MassMatrix& mass, double sigma)
      : sqrt_mass_(mass.diagonal.cwiseSqrt()) {
    SparseMatrix shifted = op.matrix;
    for (Index i = 0; i < shifted.rows(); ++i) shifted.coeffRef(i, i) -= sigma * mass.diagonal(i);
    ldlt_.compute(shifted);
    if (ldlt_.info() != Eigen::Success) throw Error("shifted operator factorization failed");
    if (op.has_low_rank()) {
      low_rank_ = op.low_rank;
      solved_low_rank_ = ldlt_.solve(low_rank_);
      const Matrix capacitance =
          Matrix::Identity(low_rank_.cols(), low_rank_.cols()) + low_rank_.transpose() * solved_low_rank_;
      capacitance_.compute(capacitance);
    }
  }

  Matrix apply(const Matrix& x) const {
    Matrix y = ldlt_.solve(sqrt_mass_.asDiagonal() * x);
    if (low_rank_.cols() > 0) y -= solved_low_rank_ * capacitance_.solve(low_rank_.transpose() * y);
    return sqrt_mass_.asDiagonal() * y;
  }

 private:
  Vector sqrt_mass_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Matrix low_rank_;
  Matrix solved_low_rank_;
  Eigen::LDLT<Matrix> capacitance_;
};

Matrix random_block(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) out(r, c) = normal(rng);
  }
  return out;
}

// Orthogonalizes `block` against the first `used` columns of `basis` and
// against itself (two Gram-Schmidt passes per column). Columns that vanish
// are replaced by fresh random directions.
Matrix orthonormal_extension(const Matrix& basis, Index used, const Matrix& block, std::mt19937_64& rng) {
  const auto V = basis.leftCols(used);
  Matrix accepted(block.rows(), block.cols());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index c = 0; c < block.cols(); ++c) {
    Vector col = block.col(c);
    bool ok = false;
    for (int attempt = 0; attempt < 4 && !ok; ++attempt) {
      const double before = col.norm();
      for (int pass = 0; pass < 2; ++pass) {
        col -= V * (V.transpose() * col);
        col -= accepted.leftCols(c) * (accepted.leftCols(c).transpose() * col);
      }
      const double after = col.norm();
      if (after > 1e-10 * before && after > 0.0) {
        accepted.col(c) = col / after;
        ok = true;
      } else {
        for (Index r = 0; r < col.size(); ++r) col(r) = normal(rng);
      }
    }
    if (!ok) throw ConvergenceError("could not extend the Krylov basis", 1.0);
  }
  return accepted;
}

std::string format_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", r);
  return buf;
}

void fix_signs(Matrix& vectors) {
  for (Index c = 0; c < vectors.cols(); ++c) {
    const double scale = vectors.col(c).cwiseAbs().maxCoeff();
    for (Index r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > 1e-8 * scale) {
        if (vectors(r, c) < 0.0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

double one_norm(const SparseOperator& op) {
  double best = 0.0;
  for (Index col = 0; col < op.matrix.outerSize(); ++col) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(op.matrix, col); it; ++it) sum += std::abs(it.value());
    best = std::max(best, sum);
  }
  if (op.has_low_rank()) {
    const Matrix gram = op.low_rank * op.low_rank.transpose();
    best += gram.cwiseAbs().colwise().sum().maxCoeff();
  }
  return best;
}

Spectrum dense_solve(const SparseOperator& op, const MassMatrix& mass) {
  const Matrix stiffness = op.dense();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> solver(stiffness, Matrix(mass.diagonal.asDiagonal()));
  if (solver.info() != Eigen::Success) throw Error("dense generalized eigensolver failed");
  Spectrum out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  fix_signs(out.eigenvectors);
  return out;
}

void check_pair(const SparseOperator& op, const MassMatrix& mass) {
  if (op.matrix.rows() != op.matrix.cols()) throw Error("operator is not square");
  if (mass.dimension() != op.dimension()) throw Error("operator and mass dimensions differ");
  if (op.has_low_rank() && op.low_rank.rows() != op.dimension()) throw Error("low-rank factor dimension mismatch");
  if ((mass.diagonal.array() <= 0.0).any()) throw Error("mass matrix must be strictly positive");
}

}  // namespace

double backward_error(const SparseOperator& op, const MassMatrix& mass, double lambda, const Vector& x) {
  const Vector r = op.apply(x) - lambda * mass.diagonal.cwiseProduct(x);
  const double denom = (one_norm(op) + std::abs(lambda) * mass.diagonal.cwiseAbs().maxCoeff()) * x.norm();
  return denom > 0.0 ? r.norm() / denom : r.norm();
}

Spectrum dense_eigen_oracle(const SparseOperator& op, const MassMatrix& mass, Index max_dimension) {
  check_pair(op, mass);
  if (op.dimension() > max_dimension) {
    throw Error("dense oracle limited to dimension " + std::to_string(max_dimension) + ", got " +
                std::to_string(op.dimension()));
  }
  return dense_solve(op, mass);
}

Spectrum smallest_eigenpairs(const OperatorPair& pair, int k, bool want_vectors, std::uint64_t seed,
                             const EigenOptions& options) {
  return smallest_eigenpairs(pair.stiffness, pair.mass, k, want_vectors, seed, options);
}

Spectrum smallest_eigenpairs(const SparseOperator& op, const MassMatrix& mass, int k, bool want_vectors,
                             std::uint64_t seed, const EigenOptions& options) {
  check_pair(op, mass);
  const Index n = op.dimension();
  if (k < 1) throw Error("requested " + std::to_string(k) + " eigenpairs; need at least 1");
  if (k > n) throw Error("requested " + std::to_string(k) + " eigenpairs of a " + std::to_string(n) + "-dimensional problem");

  const Index block = std::max<Index>(1, options.block_size);
  const Index capacity = 2 * k + 2 * block;

  Spectrum out;
  if (capacity + block >= n) {
    Spectrum full = dense_solve(op, mass);
    out.eigenvalues = full.eigenvalues.head(k);
    if (want_vectors) out.eigenvectors = full.eigenvectors.leftCols(k);
  } else {
    const double trace_scale = op.matrix.diagonal().sum() / mass.diagonal.sum();
    const double sigma = -1e-4 * std::max(std::abs(trace_scale), 1e-300);
    const ShiftInvert shift_invert(op, mass, sigma);
    std::mt19937_64 rng(seed);

    Matrix V(n, capacity), AV(n, capacity);
    Index used = 0;
    Matrix pending = random_block(n, block, rng);
    const Index keep = k + block;
    Matrix ritz_vectors;
    Vector ritz_values;
    bool converged = false;
    double worst = 0.0;

    for (int restart = 0; restart <= options.max_restarts && !converged; ++restart) {
      out.restarts = restart;
      while (used < capacity) {
        Matrix next = orthonormal_extension(V, used, pending, rng);
        const Index take = std::min<Index>(next.cols(), capacity - used);
        V.middleCols(used, take) = next.leftCols(take);
        AV.middleCols(used, take) = shift_invert.apply(next.leftCols(take));
        pending = AV.middleCols(used, take);
        used += take;
      }

      Matrix projected = V.transpose() * AV;
      projected = 0.5 * (projected + projected.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> rr(projected);
      // descending Ritz values of the shift-inverted operator = ascending eigenvalues
      const Matrix Y = rr.eigenvectors().rowwise().reverse();
      const Vector theta = rr.eigenvalues().reverse();

      const Matrix X = V * Y.leftCols(keep);
      const Matrix AX = AV * Y.leftCols(keep);
      const Matrix residual = AX - X * theta.head(keep).asDiagonal();

      worst = 0.0;
      Index first_unconverged = -1;
      for (Index i = 0; i < k; ++i) {
        const double rel = residual.col(i).norm() / std::abs(theta(i));
        worst = std::max(worst, rel);
        if (rel > options.tolerance && first_unconverged < 0) first_unconverged = i;
      }
      if (first_unconverged < 0) {
        converged = true;
        ritz_vectors = X.leftCols(k);
        ritz_values = theta.head(k);
        break;
      }

      // Thick restart: keep the leading Ritz vectors, expand from the
      // residuals of the first unconverged ones (orthogonal to the old basis).
      V.leftCols(keep) = X;
      AV.leftCols(keep) = AX;
      used = keep;
      pending = residual.middleCols(first_unconverged, std::min<Index>(block, keep - first_unconverged));
    }
    if (!converged) {
      throw ConvergenceError("eigensolver did not converge after " + std::to_string(options.max_restarts) +
                                 " restarts (worst relative Ritz residual " + format_residual(worst) + ")",
                             worst);
    }

    // Final Rayleigh-Ritz on the original pair sharpens the eigenvalues.
    Matrix psi = mass.diagonal.cwiseSqrt().cwiseInverse().asDiagonal() * ritz_vectors;
    const Matrix stiff_proj = psi.transpose() * op.apply(psi);
    const Matrix mass_proj = psi.transpose() * (mass.diagonal.asDiagonal() * psi);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> refine(0.5 * (stiff_proj + stiff_proj.transpose()),
                                                           0.5 * (mass_proj + mass_proj.transpose()));
    out.eigenvalues = refine.eigenvalues();
    out.eigenvectors = psi * refine.eigenvectors();
    fix_signs(out.eigenvectors);
  }

  if (out.eigenvectors.cols() > 0) {
    for (Index i = 0; i < out.eigenvectors.cols(); ++i) {
      out.max_residual = std::max(out.max_residual,
                                  backward_error(op, mass, out.eigenvalues(i), out.eigenvectors.col(i)));
    }
    if (out.max_residual > options.acceptance) {
      throw ConvergenceError("eigenpairs failed the residual check (backward error " +
                                 format_residual(out.max_residual) + ")",
                             out.max_residual);
    }
  }
  if (!want_vectors) out.eigenvectors.resize(0, 0);
  return out;
}

std::string spectrum_to_json(const Spectrum& spectrum) {
  nlohmann::json j = nlohmann::json::array();
  for (Index i = 0; i < spectrum.size(); ++i) j.push_back(spectrum.eigenvalues(i));
  return j.dump();
}

Vector spectrum_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const nlohmann::json& values = j.is_object() ? j.at("eigenvalues") : j;
  Vector out(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out(static_cast<Index>(i)) = values[i].get<double>();
  return out;
}

}  // namespace spectraforge

#include "doctest.h"

#include "spectraforge/cube.hpp"
#include "spectraforge/eigensolver.hpp"
#include "spectraforge/io.hpp"
#include "spectraforge/operators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace spectraforge;

namespace {

bool same_entries(const SparseMatrix& a, const SparseMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && Eigen::MatrixXd(a) == Eigen::MatrixXd(b);
}

double symmetry_defect(const SparseMatrix& a) {
  const SparseMatrix diff = a - SparseMatrix(a.transpose());
  double worst = 0.0;
  for (Index c = 0; c < diff.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(diff, c); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

Mesh rigidly_moved(const Mesh& m, double scale = 1.0) {
  const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  Vertices V = (scale * m.vertices * R.transpose()).rowwise() + Eigen::RowVector3d(0.3, -1.2, 2.0);
  return make_mesh(V, m.faces);
}

Eigen::VectorXd dense_spectrum(const OperatorPair& p) {
  return dense_eigen_oracle(p.stiffness, p.mass).eigenvalues;
}

}  // namespace

TEST_CASE("cotangent Laplacian of a closed icosphere annihilates constants") {
  const OperatorPair p = cotan_laplacian(make_icosphere(3));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p.dimension());
  CHECK((p.stiffness.matrix * ones).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(symmetry_defect(p.stiffness.matrix) <= 1e-12 * p.stiffness.matrix.coeffs().cwiseAbs().maxCoeff());
  CHECK((p.mass.diagonal.array() > 0.0).all());
  CHECK(p.warnings.empty());
}

TEST_CASE("two-triangle unit square matches hand-computed cotangents") {
  // cot 45 = 1 on the four sides, cot 90 = 0 across the diagonal
  const Mesh m = parse_off("OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n");
  const OperatorPair p = cotan_laplacian(m);
  Eigen::Matrix4d expected;
  expected << 1.0, -0.5, 0.0, -0.5,
             -0.5, 1.0, -0.5, 0.0,
              0.0, -0.5, 1.0, -0.5,
             -0.5, 0.0, -0.5, 1.0;
  CHECK((Eigen::MatrixXd(p.stiffness.matrix) - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.mass.diagonal(0) == doctest::Approx(1.0 / 3.0));
  CHECK(p.mass.diagonal(1) == doctest::Approx(1.0 / 6.0));
  CHECK(p.mass.diagonal(2) == doctest::Approx(1.0 / 3.0));
  CHECK(p.mass.diagonal(3) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("flat grid interior stencil is the five-point Laplacian") {
  const int n = 6;
  const double h = 1.0 / n;
  const OperatorPair p = cotan_laplacian(make_grid(n, n));
  const Eigen::MatrixXd L(p.stiffness.matrix);
  const int v = 2 * (n + 1) + 3;
  CHECK(L(v, v) == doctest::Approx(4.0));
  for (int nb : {v - 1, v + 1, v - (n + 1), v + (n + 1)}) CHECK(L(v, nb) == doctest::Approx(-1.0));
  CHECK(std::abs(L(v, v + n + 2)) < 1e-15);  // diagonal edge, right angles on both sides
  CHECK(std::abs(L(v, v - n - 2)) < 1e-15);
  CHECK(p.mass.diagonal(v) == doctest::Approx(h * h));
  CHECK(L.row(v).sum() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("zero-area triangle is clamped with a warning") {
  const Mesh m = parse_off("OFF\n4 2 0\n0 0 0\n1 0 0\n2 0 0\n0 1 0\n3 0 1 2\n3 0 1 3\n");
  const OperatorPair p = cotan_laplacian(m);
  CHECK(Eigen::MatrixXd(p.stiffness.matrix).allFinite());
  CHECK_FALSE(p.warnings.empty());
}

TEST_CASE("dirichlet_reduce") {
  const OperatorPair p = cotan_laplacian(make_grid(4, 4));
  SUBCASE("empty boundary leaves the pair unchanged") {
    const OperatorPair r = dirichlet_reduce(p, {});
    CHECK(same_entries(r.stiffness.matrix, p.stiffness.matrix));
    CHECK(r.mass.diagonal == p.mass.diagonal);
  }
  SUBCASE("all but one vertex removed gives a 1x1 system") {
    IndexList boundary;
    for (int i = 0; i < p.dimension(); ++i) {
      if (i != 12) boundary.push_back(i);
    }
    const OperatorPair r = dirichlet_reduce(p, boundary);
    REQUIRE(r.dimension() == 1);
    CHECK(r.stiffness.matrix.coeff(0, 0) == p.stiffness.matrix.coeff(12, 12));
    CHECK(r.vertex_map == IndexList{12});
  }
  SUBCASE("removing everything is an error") {
    IndexList all(static_cast<std::size_t>(p.dimension()));
    std::iota(all.begin(), all.end(), 0);
    CHECK_THROWS_AS(dirichlet_reduce(p, all), GeometryError);
  }
}

TEST_CASE("Dirichlet unit square converges to 2 pi^2 under refinement") {
  double previous_error = 1e9;
  for (int n : {8, 16, 32}) {
    const OperatorPair p = dirichlet_reduce(cotan_laplacian(make_grid(n, n)), grid_perimeter(n, n));
    const double lambda = dense_spectrum(p)(0);
    const double error = std::abs(lambda - 2.0 * std::numbers::pi * std::numbers::pi);
    CHECK(error < previous_error);
    previous_error = error;
  }
  CHECK(previous_error / (2.0 * std::numbers::pi * std::numbers::pi) < 2e-3);
}

TEST_CASE("PAT") {
  SUBCASE("closed component gives the plain Laplacian") {
    const Mesh sphere = make_icosphere(2);
    const OperatorPair pat = pat_operator(sphere, full_region(sphere.num_vertices()));
    const OperatorPair lbo = cotan_laplacian(sphere);
    CHECK(same_entries(pat.stiffness.matrix, lbo.stiffness.matrix));
    CHECK(pat.mass.diagonal == lbo.mass.diagonal);
  }
  SUBCASE("cube front face equals the reduced submesh Laplacian exactly") {
    const Mesh cube = generate_cube({12, 70, 1.2, 0.15});
    const Region front = cube_front_region(12);
    const Submesh sub = extract_submesh(cube, front);
    const OperatorPair composed = dirichlet_reduce(cotan_laplacian(sub.mesh), sub.boundary);
    const OperatorPair pat = pat_operator(cube, front);
    CHECK(same_entries(pat.stiffness.matrix, composed.stiffness.matrix));
    CHECK(pat.mass.diagonal == composed.mass.diagonal);
    CHECK(pat.dimension() == 11 * 11);
    // vertex map points at original front-face interior vertices
    for (int v : pat.vertex_map) CHECK(front.contains(v));
  }
  SUBCASE("region without a face") {
    const Mesh cube = generate_cube({8, 0, 1.0, 0.15});
    CHECK_THROWS_AS(pat_operator(cube, make_region({0, 1}, cube.num_vertices())), GeometryError);
  }
}

TEST_CASE("HAM") {
  const Mesh cube = generate_cube({8, 30, 1.0, 0.15});
  const Region front = cube_front_region(8);
  const OperatorPair lbo = cotan_laplacian(cube);
  SUBCASE("tau = 0 is the Laplacian") {
    const OperatorPair ham = ham_operator(cube, front, 0.0);
    CHECK(same_entries(ham.stiffness.matrix, lbo.stiffness.matrix));
    CHECK(ham.mass.diagonal == lbo.mass.diagonal);
  }
  SUBCASE("region covering everything is the Laplacian for any tau") {
    const OperatorPair ham = ham_operator(cube, full_region(cube.num_vertices()), 1e6);
    CHECK(same_entries(ham.stiffness.matrix, lbo.stiffness.matrix));
  }
  SUBCASE("potential sits on the complement, mass-weighted") {
    const OperatorPair ham = ham_operator(lbo, front, 2.0);
    const int outside = complement(front, cube.num_vertices()).indices.front();
    const int inside = front.indices.front();
    CHECK(ham.stiffness.matrix.coeff(outside, outside) ==
          doctest::Approx(lbo.stiffness.matrix.coeff(outside, outside) + 2.0 * lbo.mass.diagonal(outside)));
    CHECK(ham.stiffness.matrix.coeff(inside, inside) == lbo.stiffness.matrix.coeff(inside, inside));
  }
  SUBCASE("negative tau rejected") { CHECK_THROWS(ham_operator(lbo, front, -1.0)); }
}

TEST_CASE("HAM eigenvalues approach PAT monotonically as tau grows") {
  const Mesh cube = generate_cube({10, 40, 1.0, 0.15});
  const Region front = cube_front_region(10);
  const OperatorPair lbo = cotan_laplacian(cube);
  const double mean30 = dense_spectrum(lbo).head(30).mean();
  const Eigen::VectorXd pat = dense_spectrum(pat_operator(cube, front)).head(10);
  double previous_gap = 1e300;
  for (double scale : {1e2, 1e3, 1e4}) {
    const Eigen::VectorXd ham = dense_spectrum(ham_operator(lbo, front, scale * mean30)).head(10);
    CHECK((ham.array() <= pat.array() + 1e-9 * pat.array()).all());
    const double gap = (pat - ham).cwiseAbs().sum();
    CHECK(gap < previous_gap);
    previous_gap = gap;
  }
}

TEST_CASE("LMH") {
  const Mesh cube = generate_cube({20, 50, 1.4, 0.15});
  const Region front = cube_front_region(20);
  const OperatorPair lbo = cotan_laplacian(cube);
  const Spectrum global = smallest_eigenpairs(lbo, 30, true, 1);
  const double tau = default_potential(global.eigenvalues);
  const OperatorPair ham = ham_operator(lbo, front, tau);

  SUBCASE("mu = 0 equals HAM") {
    const OperatorPair lmh = lmh_operator(lbo, front, tau, 0.0, global.eigenvectors.leftCols(15));
    CHECK(same_entries(lmh.stiffness.matrix, ham.stiffness.matrix));
    CHECK_FALSE(lmh.stiffness.has_low_rank());
  }
  SUBCASE("empty basis equals HAM") {
    const OperatorPair lmh = lmh_operator(lbo, front, tau, tau, Eigen::MatrixXd(lbo.dimension(), 0));
    CHECK(same_entries(lmh.stiffness.matrix, ham.stiffness.matrix));
    CHECK_FALSE(lmh.stiffness.has_low_rank());
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(lmh_operator(lbo, front, tau, tau, Eigen::MatrixXd::Ones(5, 3)), GeometryError);
  }
  SUBCASE("low eigenvectors become mass-orthogonal to the global basis") {
    const double mean30 = global.eigenvalues.mean();
    const Eigen::MatrixXd phi = global.eigenvectors.leftCols(15);
    auto max_overlap = [&](double potential, double mu) {
      const OperatorPair lmh = lmh_operator(lbo, front, potential, mu, phi);
      const Spectrum local = smallest_eigenpairs(lmh, 15, true, 2);
      return (phi.transpose() * lbo.mass.diagonal.asDiagonal() * local.eigenvectors).cwiseAbs().maxCoeff();
    };
    CHECK(max_overlap(1e2 * mean30, 1e4 * mean30) < 1e-3);
    // with the potential fixed, overlap shrinks as mu grows
    CHECK(max_overlap(1e2 * mean30, 1e5 * mean30) < max_overlap(1e2 * mean30, 1e3 * mean30));
  }
  SUBCASE("LMH operator is exactly symmetric") {
    const OperatorPair lmh = lmh_operator(lbo, front, tau, tau, global.eigenvectors.leftCols(15));
    const Eigen::MatrixXd dense = lmh.stiffness.dense();
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("operators are symmetric positive semidefinite") {
  const Mesh cube = generate_cube({8, 100, 0.8, 0.15});
  const Region front = cube_front_region(8);
  const OperatorPair lbo = cotan_laplacian(cube);
  const Spectrum global = smallest_eigenpairs(lbo, 10, true, 0);
  const double tau = default_potential(global.eigenvalues);
  for (const OperatorPair& p : {lbo, pat_operator(cube, front), ham_operator(lbo, front, tau),
                                lmh_operator(lbo, front, tau, tau, global.eigenvectors)}) {
    const Eigen::MatrixXd dense = p.stiffness.dense();
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * dense.cwiseAbs().maxCoeff());
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense, Eigen::EigenvaluesOnly).eigenvalues();
    CHECK(ev.minCoeff() >= -1e-8 * ev.maxCoeff());
  }
}

TEST_CASE("cotangent spectra are isometry invariant and scale as 1/s^2") {
  const Mesh cube = generate_cube({8, 64, 1.2, 0.15});
  const Eigen::VectorXd base = dense_spectrum(cotan_laplacian(cube)).head(20);
  const Eigen::VectorXd moved = dense_spectrum(cotan_laplacian(rigidly_moved(cube))).head(20);
  for (Index i = 1; i < base.size(); ++i) CHECK(std::abs(moved(i) - base(i)) <= 1e-9 * base(i));
  const double s = 2.5;
  const Eigen::VectorXd scaled = dense_spectrum(cotan_laplacian(rigidly_moved(cube, s))).head(20);
  for (Index i = 1; i < base.size(); ++i) CHECK(std::abs(scaled(i) * s * s - base(i)) <= 1e-9 * base(i));
}

TEST_CASE("point cloud graph Laplacian") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vertices cloud(300, 3);
  for (Index i = 0; i < cloud.rows(); ++i) cloud.row(i) << u(rng), u(rng), 0.3 * u(rng);

  SUBCASE("constants are in the kernel") {
    const OperatorPair p = pointcloud_laplacian(cloud, 12);
    CHECK((p.stiffness.matrix * Eigen::VectorXd::Ones(300)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(symmetry_defect(p.stiffness.matrix) == 0.0);
  }
  SUBCASE("rigid motion leaves the spectrum unchanged") {
    const Eigen::Matrix3d R = Eigen::AngleAxisd(1.1, Eigen::Vector3d(0.2, -1, 0.5).normalized()).toRotationMatrix();
    const Vertices moved = (cloud * R.transpose()).rowwise() + Eigen::RowVector3d(4, 5, 6);
    const Eigen::VectorXd a = dense_spectrum(pointcloud_laplacian(cloud, 12)).head(20);
    const Eigen::VectorXd b = dense_spectrum(pointcloud_laplacian(moved, 12)).head(20);
    for (Index i = 1; i < 20; ++i) CHECK(std::abs(a(i) - b(i)) <= 1e-9 * a(i));
  }
  SUBCASE("k must be below n") { CHECK_THROWS_AS(pointcloud_laplacian(cloud.topRows(5), 5), GeometryError); }
  SUBCASE("duplicate points floor the neighbor scale") {
    const Vertices dup = Vertices::Zero(6, 3);
    const OperatorPair p = pointcloud_laplacian(dup, 3);
    CHECK_FALSE(p.warnings.empty());
    CHECK(Eigen::MatrixXd(p.stiffness.matrix).allFinite());
  }
}

TEST_CASE("point cloud spectrum of a square tracks the mesh spectrum up to scale") {
  // Oracle: cotangent Laplacian of the matching grid mesh, one fitted scale.
  const int n = 30;
  const Mesh grid = make_grid(n, n);
  const Eigen::VectorXd mesh_ev = dense_spectrum(cotan_laplacian(grid)).segment(1, 5);
  const Eigen::VectorXd cloud_ev = dense_spectrum(pointcloud_laplacian(grid.vertices, 12)).segment(1, 5);
  const double scale = mesh_ev.dot(cloud_ev) / cloud_ev.dot(cloud_ev);
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(scale * cloud_ev(i) - mesh_ev(i)) <= 0.15 * mesh_ev(i));
  }
}

TEST_CASE("matrix market dump") {
  SparseMatrix m(2, 2);
  m.insert(0, 0) = 1.5;
  m.insert(1, 0) = -0.25;
  m.makeCompressed();
  std::ostringstream out;
  write_matrix_market(out, m);
  CHECK(out.str() == "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.5\n2 1 -0.25\n");
}

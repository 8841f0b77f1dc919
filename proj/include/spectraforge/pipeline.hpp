#pragma once

#include "spectraforge/cube.hpp"
#include "spectraforge/encoding.hpp"
#include "spectraforge/operators.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace spectraforge {

/// How a shape becomes an encoding. Without a local operator only the
/// global spectrum is used (the LBO baseline).
struct EncodingRecipe {
  std::optional<LocalOperator> local;
  int k = 15;                         // global eigenvalues
  int h = 15;                         // eigenvalues per region
  double potential_scale = 1e4;       // tau = scale * mean of the first 30 global eigenvalues
  double orthogonality_scale = 1.0;   // mu = scale * tau
  int neighbors = 12;                 // point-cloud k-NN
  std::uint64_t seed = 0;             // eigensolver start block

  /// "LBO30", "PAT15+15", "HAM10+10+10" (one term per region).
  std::string name(std::size_t regions = 1) const;
  bool operator==(const EncodingRecipe&) const = default;
};

/// Raw truncated spectra of one shape; enough to build any encoding with
/// smaller k or h.
struct ShapeSpectra {
  Eigen::VectorXd global;
  std::vector<LabeledSpectrum> locals;
};

/// Global spectrum of max(k, 30) eigenvalues when a potential is needed,
/// else k. Locals in region order.
ShapeSpectra compute_spectra(const Mesh& shape, const std::vector<Region>& regions, const EncodingRecipe& recipe);

/// Truncates spectra to k global and h local eigenvalues and differences them.
SpectralEncoding encode_spectra(const ShapeSpectra& spectra, int k, int h);
SpectralEncoding encode_shape(const Mesh& shape, const std::vector<Region>& regions, const EncodingRecipe& recipe);

/// Laplacian of a mesh or, for a face-less shape, of its point cloud.
OperatorPair shape_laplacian(const Mesh& shape, int neighbors);

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

std::vector<ShapeSpectra> compute_dataset_spectra(const Dataset& dataset, const EncodingRecipe& recipe,
                                                  const ProgressCallback& progress = {});

/// Spectra cached as JSON under `cache_dir`, keyed by the recipe. Recomputed
/// (and rewritten) when missing or stale.
std::vector<ShapeSpectra> cached_dataset_spectra(const Dataset& dataset, const EncodingRecipe& recipe,
                                                 const std::filesystem::path& cache_dir,
                                                 const ProgressCallback& progress = {});

std::string spectra_to_json(const std::vector<ShapeSpectra>& spectra, const EncodingRecipe& recipe);
std::vector<ShapeSpectra> spectra_from_json(const std::string& text, EncodingRecipe* recipe = nullptr);

/// Worker count: SPECTRAFORGE_THREADS if set and positive, else the
/// hardware concurrency.
int worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. The first
/// exception thrown by any worker is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace spectraforge

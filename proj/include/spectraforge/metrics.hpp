#pragma once

#include "spectraforge/encoding.hpp"
#include "spectraforge/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spectraforge {

struct ShapeModel;
struct Dataset;

/// Mean squared vertex displacement, over `region` when given.
double mse(const Mesh& pred, const Mesh& gt, const std::optional<Region>& region = std::nullopt);
double mse(const Vertices& pred, const Vertices& gt, const std::optional<Region>& region = std::nullopt);

/// Mean |area_i(pred) - area_i(gt)| of the barycentric vertex areas.
double area_error(const Mesh& pred, const Mesh& gt, const std::optional<Region>& region = std::nullopt);

/// Edge-graph shortest path lengths (Euclidean edge weights) from `source`;
/// unreachable vertices get +inf.
Eigen::VectorXd graph_distances(const Mesh& mesh, int source);

struct DistortionResult {
  double value = 0.0;           // mean |d_pred - d_gt| over the counted pairs
  double region_value = 0.0;    // same, restricted to target vertices in the region
  std::size_t pairs = 0;
  std::size_t excluded_pairs = 0;  // pairs unreachable on either mesh
  std::vector<std::string> warnings;
};

/// Geodesic distortion between sample vertices and every vertex.
DistortionResult metric_distortion(const Mesh& pred, const Mesh& gt, const IndexList& samples,
                                   const std::optional<Region>& region = std::nullopt);

/// Rotation (det +1) and translation minimizing ||R p + t - g||^2 over the rows.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::RowVector3d translation = Eigen::RowVector3d::Zero();
};
RigidTransform procrustes(const Vertices& pred, const Vertices& gt);

/// MSE on the region after the best rigid alignment of the two patches.
double align_error(const Mesh& pred, const Mesh& gt, const Region& region);

struct EnnResult {
  double enn = 0.0;          // mean MSE of the retrieved training shapes
  double em_lt_enn = 0.0;    // percentage of items where the model's MSE is lower
  std::vector<int> nearest;  // retrieved training index per test item
  std::vector<double> baseline_mse;
};

/// Retrieval baseline: each test encoding is answered with the training
/// shape whose encoding is closest in L2. Ties go to the shape with the
/// smaller error. `model_mse` (one per test item) may be empty, leaving
/// em_lt_enn at 0.
EnnResult enn_baseline(const std::vector<SpectralEncoding>& test_encodings,
                       const std::vector<SpectralEncoding>& train_encodings,
                       const std::vector<Vertices>& train_shapes, const std::vector<Vertices>& gt_shapes,
                       const std::vector<double>& model_mse = {});

struct EvalReport {
  std::string method;
  std::size_t test_shapes = 0;
  double mse = 0.0;
  double mse_region = 0.0;
  double mse_region_complement = 0.0;
  double enn = 0.0;
  double em_lt_enn = 0.0;
  double area = 0.0;
  double area_region = 0.0;
  double metric = 0.0;
  double metric_region = 0.0;
  double align = 0.0;
  std::size_t excluded_pairs = 0;
};

/// Display scale of each column (the raw values stay unscaled).
struct ReportColumn {
  const char* name;
  double scale;
};
const std::vector<ReportColumn>& report_columns();

struct EvaluateOptions {
  int samples = 100;
  std::uint64_t sample_seed = 0;
  bool geodesics = true;
};

/// Evaluates a model on the dataset's test split against ground truth,
/// using each shape's first region.
EvalReport evaluate_model(const ShapeModel& model, const Dataset& dataset,
                          const std::vector<SpectralEncoding>& encodings, const EvaluateOptions& options = {});

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
/// Aligned text table, one row per report.
std::string format_report_table(const std::vector<EvalReport>& reports);

}  // namespace spectraforge

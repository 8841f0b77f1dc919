#include "spectraforge/metrics.hpp"

#include "spectraforge/cube.hpp"
#include "spectraforge/model.hpp"
#include "spectraforge/pipeline.hpp"

#include "json.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>

namespace spectraforge {
namespace {

void check_correspondence(Index pred, Index gt) {
  if (pred != gt) {
    throw GeometryError("vertex count mismatch: " + std::to_string(pred) + " vs " + std::to_string(gt));
  }
}

void check_connectivity(const Mesh& pred, const Mesh& gt) {
  check_correspondence(pred.num_vertices(), gt.num_vertices());
  if (pred.faces.rows() != gt.faces.rows() || pred.faces != gt.faces) {
    throw GeometryError("meshes do not share connectivity");
  }
}

void check_region(const Region& region, Index n) {
  if (region.indices.empty()) throw GeometryError("region '" + region.label + "' is empty");
  if (region.indices.back() >= n || region.indices.front() < 0) {
    throw GeometryError("region '" + region.label + "' indexes past the shape");
  }
}

template <typename PerVertex>
double mean_over(Index n, const std::optional<Region>& region, PerVertex&& f) {
  double sum = 0.0;
  if (!region) {
    for (Index i = 0; i < n; ++i) sum += f(i);
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  check_region(*region, n);
  for (int i : region->indices) sum += f(i);
  return sum / static_cast<double>(region->indices.size());
}

std::string fixed(double v, int width, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%*.*f", width, precision, v);
  return buf;
}

}  // namespace

double mse(const Vertices& pred, const Vertices& gt, const std::optional<Region>& region) {
  check_correspondence(pred.rows(), gt.rows());
  return mean_over(pred.rows(), region, [&](Index i) { return (pred.row(i) - gt.row(i)).squaredNorm(); });
}

double mse(const Mesh& pred, const Mesh& gt, const std::optional<Region>& region) {
  return mse(pred.vertices, gt.vertices, region);
}

double area_error(const Mesh& pred, const Mesh& gt, const std::optional<Region>& region) {
  check_connectivity(pred, gt);
  const Eigen::VectorXd a = vertex_areas(pred);
  const Eigen::VectorXd b = vertex_areas(gt);
  return mean_over(pred.num_vertices(), region, [&](Index i) { return std::abs(a(i) - b(i)); });
}

Eigen::VectorXd graph_distances(const Mesh& mesh, int source) {
  const auto adjacency = vertex_adjacency(mesh);
  const Index n = mesh.num_vertices();
  if (source < 0 || source >= n) throw GeometryError("source vertex out of range");
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist(source) = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist(v)) continue;
    for (int w : adjacency[static_cast<std::size_t>(v)]) {
      const double nd = d + (mesh.vertices.row(v) - mesh.vertices.row(w)).norm();
      if (nd < dist(w)) {
        dist(w) = nd;
        queue.emplace(nd, w);
      }
    }
  }
  return dist;
}

DistortionResult metric_distortion(const Mesh& pred, const Mesh& gt, const IndexList& samples,
                                   const std::optional<Region>& region) {
  check_connectivity(pred, gt);
  if (samples.empty()) throw Error("metric distortion needs at least one sample vertex");
  const Index n = gt.num_vertices();
  std::vector<char> in_region;
  if (region) {
    check_region(*region, n);
    in_region.assign(static_cast<std::size_t>(n), 0);
    for (int v : region->indices) in_region[static_cast<std::size_t>(v)] = 1;
  }

  DistortionResult out;
  double sum = 0.0, region_sum = 0.0;
  std::size_t region_pairs = 0;
  for (int s : samples) {
    const Eigen::VectorXd dp = graph_distances(pred, s);
    const Eigen::VectorXd dg = graph_distances(gt, s);
    for (Index v = 0; v < n; ++v) {
      if (!std::isfinite(dp(v)) || !std::isfinite(dg(v))) {
        ++out.excluded_pairs;
        continue;
      }
      const double diff = std::abs(dp(v) - dg(v));
      sum += diff;
      ++out.pairs;
      if (region && in_region[static_cast<std::size_t>(v)]) {
        region_sum += diff;
        ++region_pairs;
      }
    }
  }
  if (out.excluded_pairs > 0) {
    out.warnings.push_back("mesh is disconnected: " + std::to_string(out.excluded_pairs) +
                           " unreachable sample-vertex pairs excluded");
  }
  out.value = out.pairs > 0 ? sum / static_cast<double>(out.pairs) : 0.0;
  out.region_value = region_pairs > 0 ? region_sum / static_cast<double>(region_pairs) : 0.0;
  return out;
}

RigidTransform procrustes(const Vertices& pred, const Vertices& gt) {
  check_correspondence(pred.rows(), gt.rows());
  if (pred.rows() < 3) throw GeometryError("rigid alignment needs at least 3 points");
  const Eigen::RowVector3d cp = pred.colwise().mean();
  const Eigen::RowVector3d cg = gt.colwise().mean();
  const Eigen::Matrix3d cov = (pred.rowwise() - cp).transpose() * (gt.rowwise() - cg);
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = cg - cp * t.rotation.transpose();
  return t;
}

double align_error(const Mesh& pred, const Mesh& gt, const Region& region) {
  check_correspondence(pred.num_vertices(), gt.num_vertices());
  if (region.indices.size() < 3) throw GeometryError("alignment region needs at least 3 vertices");
  check_region(region, gt.num_vertices());
  const auto count = static_cast<Index>(region.indices.size());
  Vertices p(count, 3), g(count, 3);
  for (Index i = 0; i < count; ++i) {
    p.row(i) = pred.vertices.row(region.indices[static_cast<std::size_t>(i)]);
    g.row(i) = gt.vertices.row(region.indices[static_cast<std::size_t>(i)]);
  }
  const RigidTransform t = procrustes(p, g);
  const Vertices aligned = (p * t.rotation.transpose()).rowwise() + t.translation;
  return mse(aligned, g);
}

EnnResult enn_baseline(const std::vector<SpectralEncoding>& test_encodings,
                       const std::vector<SpectralEncoding>& train_encodings,
                       const std::vector<Vertices>& train_shapes, const std::vector<Vertices>& gt_shapes,
                       const std::vector<double>& model_mse) {
  if (train_encodings.empty()) throw Error("the retrieval baseline needs a non-empty training set");
  if (train_shapes.size() != train_encodings.size()) throw Error("one training shape per training encoding is required");
  if (gt_shapes.size() != test_encodings.size()) throw Error("one ground-truth shape per test encoding is required");
  if (!model_mse.empty() && model_mse.size() != test_encodings.size()) throw Error("one model error per test item is required");

  EnnResult out;
  std::size_t wins = 0;
  double total = 0.0;
  for (std::size_t t = 0; t < test_encodings.size(); ++t) {
    double best_distance = std::numeric_limits<double>::infinity();
    double best_mse = std::numeric_limits<double>::infinity();
    int best = -1;
    for (std::size_t j = 0; j < train_encodings.size(); ++j) {
      require_same_layout(test_encodings[t].layout, train_encodings[j].layout, "retrieval baseline");
      const double d = (test_encodings[t].values - train_encodings[j].values).squaredNorm();
      if (d > best_distance) continue;
      const double e = mse(train_shapes[j], gt_shapes[t]);
      if (d < best_distance || e < best_mse) {
        best_distance = d;
        best_mse = e;
        best = static_cast<int>(j);
      }
    }
    out.nearest.push_back(best);
    out.baseline_mse.push_back(best_mse);
    total += best_mse;
    if (!model_mse.empty() && model_mse[t] < best_mse) ++wins;
  }
  if (!test_encodings.empty()) {
    out.enn = total / static_cast<double>(test_encodings.size());
    out.em_lt_enn = 100.0 * static_cast<double>(wins) / static_cast<double>(test_encodings.size());
  }
  return out;
}

const std::vector<ReportColumn>& report_columns() {
  static const std::vector<ReportColumn> columns = {
      {"MSE", 1e-6},    {"MSE-R", 1e-6},  {"MSE-Rc", 1e-6},   {"ENN", 1e-6},      {"EM<ENN", 1.0},
      {"Area", 1e-2},   {"Area-R", 1e-2}, {"Metric", 1e-3},   {"Metric-R", 1e-3}, {"Align", 1e-6},
  };
  return columns;
}

EvalReport evaluate_model(const ShapeModel& model, const Dataset& dataset,
                          const std::vector<SpectralEncoding>& encodings, const EvaluateOptions& options) {
  if (encodings.size() != dataset.size()) throw Error("one encoding per shape is required");
  const IndexList& test = dataset.split.test;
  if (test.empty()) throw Error("the dataset has an empty test split");

  std::vector<SpectralEncoding> test_enc, train_enc;
  std::vector<Vertices> gt, train_shapes;
  for (int i : test) {
    test_enc.push_back(encodings[static_cast<std::size_t>(i)]);
    gt.push_back(dataset.shapes[static_cast<std::size_t>(i)].vertices);
  }
  for (int i : dataset.split.train) {
    train_enc.push_back(encodings[static_cast<std::size_t>(i)]);
    train_shapes.push_back(dataset.shapes[static_cast<std::size_t>(i)].vertices);
  }
  const Eigen::MatrixXd predicted = reconstruct_columns(model, test_enc);

  struct Item {
    double mse = 0, mse_region = 0, mse_complement = 0, area = 0, area_region = 0, metric = 0, metric_region = 0,
           align = 0;
    std::size_t excluded = 0;
  };
  std::vector<Item> items(test.size());
  parallel_for(test.size(), [&](std::size_t t) {
    const auto shape_index = static_cast<std::size_t>(test[t]);
    const Mesh& truth = dataset.shapes[shape_index];
    Mesh pred{column_to_vertices(predicted.col(static_cast<Index>(t))), truth.faces};
    Item& item = items[t];
    item.mse = mse(pred, truth);
    const bool has_region = !dataset.regions[shape_index].empty();
    const bool has_faces = truth.num_faces() > 0;
    if (has_region) {
      const Region& region = dataset.regions[shape_index].front();
      item.mse_region = mse(pred, truth, region);
      const Region rest = complement(region, truth.num_vertices());
      if (!rest.indices.empty()) item.mse_complement = mse(pred, truth, rest);
      if (region.size() >= 3) item.align = align_error(pred, truth, region);
    }
    if (has_faces) {
      item.area = area_error(pred, truth);
      if (has_region) item.area_region = area_error(pred, truth, dataset.regions[shape_index].front());
      if (options.geodesics) {
        const IndexList samples = farthest_point_sample(
            truth.vertices, std::min<int>(options.samples, static_cast<int>(truth.num_vertices())), options.sample_seed);
        const auto d = metric_distortion(pred, truth, samples,
                                         has_region ? std::optional<Region>(dataset.regions[shape_index].front())
                                                    : std::nullopt);
        item.metric = d.value;
        item.metric_region = d.region_value;
        item.excluded = d.excluded_pairs;
      }
    }
  });

  EvalReport report;
  report.method = model.recipe.name(model.layout.size() - 1);
  report.test_shapes = test.size();
  std::vector<double> model_mse;
  for (const Item& item : items) {
    report.mse += item.mse;
    report.mse_region += item.mse_region;
    report.mse_region_complement += item.mse_complement;
    report.area += item.area;
    report.area_region += item.area_region;
    report.metric += item.metric;
    report.metric_region += item.metric_region;
    report.align += item.align;
    report.excluded_pairs += item.excluded;
    model_mse.push_back(item.mse);
  }
  const double count = static_cast<double>(items.size());
  for (double* v : {&report.mse, &report.mse_region, &report.mse_region_complement, &report.area, &report.area_region,
                    &report.metric, &report.metric_region, &report.align}) {
    *v /= count;
  }
  const EnnResult enn = enn_baseline(test_enc, train_enc, train_shapes, gt, model_mse);
  report.enn = enn.enn;
  report.em_lt_enn = enn.em_lt_enn;
  return report;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::json scales = nlohmann::json::object();
  for (const auto& c : report_columns()) scales[c.name] = c.scale;
  const nlohmann::json j = {
      {"method", r.method},
      {"test_shapes", r.test_shapes},
      {"mse", r.mse},
      {"mse_region", r.mse_region},
      {"mse_region_complement", r.mse_region_complement},
      {"enn", r.enn},
      {"em_lt_enn", r.em_lt_enn},
      {"area", r.area},
      {"area_region", r.area_region},
      {"metric", r.metric},
      {"metric_region", r.metric_region},
      {"align", r.align},
      {"excluded_pairs", r.excluded_pairs},
      {"display_scale", scales},
  };
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    j.at("method").get_to(r.method);
    j.at("test_shapes").get_to(r.test_shapes);
    j.at("mse").get_to(r.mse);
    j.at("mse_region").get_to(r.mse_region);
    j.at("mse_region_complement").get_to(r.mse_region_complement);
    j.at("enn").get_to(r.enn);
    j.at("em_lt_enn").get_to(r.em_lt_enn);
    j.at("area").get_to(r.area);
    j.at("area_region").get_to(r.area_region);
    j.at("metric").get_to(r.metric);
    j.at("metric_region").get_to(r.metric_region);
    j.at("align").get_to(r.align);
    j.at("excluded_pairs").get_to(r.excluded_pairs);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation report: ") + e.what(), 0);
  }
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
  const auto& columns = report_columns();
  std::size_t method_width = 6;
  for (const auto& r : reports) method_width = std::max(method_width, r.method.size());
  constexpr int kWidth = 12;

  std::string out = "Method" + std::string(method_width - 6, ' ');
  for (const auto& c : columns) {
    std::string head = c.name;
    if (c.scale != 1.0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " e%d", static_cast<int>(std::lround(std::log10(c.scale))));
      head += buf;
    }
    out += std::string(static_cast<std::size_t>(std::max<int>(1, kWidth - static_cast<int>(head.size()))), ' ') + head;
  }
  out += "\n";
  for (const auto& r : reports) {
    const double values[] = {r.mse,  r.mse_region,  r.mse_region_complement, r.enn,           r.em_lt_enn,
                             r.area, r.area_region, r.metric,                r.metric_region, r.align};
    out += r.method + std::string(method_width - r.method.size(), ' ');
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].scale == 1.0) {
        out += fixed(values[c], kWidth - 1, 0) + "%";
      } else {
        out += fixed(values[c] / columns[c].scale, kWidth, 3);
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace spectraforge

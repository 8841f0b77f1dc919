#include "spectraforge/cube.hpp"

#include "spectraforge/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace spectraforge {
namespace {

constexpr std::array<double, 5> kSizes = {0.15, 0.18, 0.21, 0.24, 0.27};
constexpr std::array<double, 2> kAspects = {1.6, 2.4};
// Width of the bevel in normalized-radius units.
constexpr double kBevel = 0.35;

double degrees(double d) { return d * std::numbers::pi / 180.0; }

std::string shape_filename(std::size_t i, bool cloud) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "shape_%04zu.%s", i, cloud ? "xyz" : "off");
  return buf;
}

}  // namespace

std::string to_string(PatternFamily family) {
  switch (family) {
    case PatternFamily::Circle: return "circle";
    case PatternFamily::Square: return "square";
    case PatternFamily::Ellipse: return "ellipse";
    case PatternFamily::Rectangle: return "rectangle";
  }
  return "unknown";
}

Pattern pattern(int id) {
  if (id < 0 || id >= kPatternCount) {
    throw GeometryError("pattern id " + std::to_string(id) + " outside [0, " + std::to_string(kPatternCount) + ")");
  }
  if (id < 5) return {PatternFamily::Circle, kSizes[id], 1.0, 0.0};
  if (id < 25) {
    const int local = id - 5;
    return {PatternFamily::Square, kSizes[local / 4], 1.0, degrees(15.0 * (local % 4))};
  }
  const bool ellipse = id < 75;
  const int local = id - (ellipse ? 25 : 75);
  const int size = local / 10, aspect = (local / 5) % 2, rot = local % 5;
  return {ellipse ? PatternFamily::Ellipse : PatternFamily::Rectangle, kSizes[size], kAspects[aspect],
          degrees(11.25 * rot)};
}

double pattern_profile(const Pattern& p, double u, double v) {
  const double c = std::cos(p.rotation), s = std::sin(p.rotation);
  const double a = p.half_extent, b = p.half_extent / p.aspect;
  const double x = (c * u + s * v) / a;
  const double y = (-s * u + c * v) / b;
  double r = 0.0;
  switch (p.family) {
    case PatternFamily::Circle:
    case PatternFamily::Ellipse: r = std::hypot(x, y); break;
    case PatternFamily::Square:
    case PatternFamily::Rectangle: r = std::max(std::abs(x), std::abs(y)); break;
  }
  return std::clamp((1.0 - r) / kBevel, 0.0, 1.0);
}

std::vector<double> depth_factors(int count) {
  if (count < 1) throw GeometryError("need at least one depth factor");
  if (count == 1) return {0.6};
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = 0.6 + 1.4 * i / (count - 1);
  return out;
}

Mesh generate_cube(const CubeSpec& spec) {
  const int r = spec.face_resolution;
  if (r < 8) throw GeometryError("face resolution " + std::to_string(r) + " too low; patterns need at least 8");
  const Pattern pat = pattern(spec.pattern_id);

  const int side = r + 1;
  auto lattice = [side](int i, int j, int k) { return (k * side + j) * side + i; };
  std::vector<int> index(static_cast<std::size_t>(side * side * side), -1);
  std::vector<Eigen::Vector3i> cells;
  for (int k = 0; k <= r; ++k) {
    for (int j = 0; j <= r; ++j) {
      for (int i = 0; i <= r; ++i) {
        if (i == 0 || j == 0 || k == 0 || i == r || j == r || k == r) {
          index[lattice(i, j, k)] = static_cast<int>(cells.size());
          cells.emplace_back(i, j, k);
        }
      }
    }
  }

  Vertices V(static_cast<Index>(cells.size()), 3);
  for (std::size_t v = 0; v < cells.size(); ++v) {
    const auto& c = cells[v];
    const double u = static_cast<double>(c(0)) / r - 0.5;
    const double w = static_cast<double>(c(1)) / r - 0.5;
    double z = (static_cast<double>(c(2)) / r - 1.0) * spec.depth_factor;
    if (c(2) == r) z += spec.extrusion_height * pattern_profile(pat, u, w);
    V.row(static_cast<Index>(v)) << u, w, z;
  }

  std::vector<Eigen::Vector3i> faces;
  faces.reserve(static_cast<std::size_t>(12 * r * r));
  for (int axis = 0; axis < 3; ++axis) {
    const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
    for (int level : {0, r}) {
      for (int a = 0; a < r; ++a) {
        for (int b = 0; b < r; ++b) {
          auto at = [&](int du, int dv) {
            int p[3];
            p[axis] = level;
            p[ua] = a + du;
            p[va] = b + dv;
            return index[lattice(p[0], p[1], p[2])];
          };
          const int p00 = at(0, 0), p10 = at(1, 0), p11 = at(1, 1), p01 = at(0, 1);
          if (level == r) {
            faces.emplace_back(p00, p10, p11);
            faces.emplace_back(p00, p11, p01);
          } else {
            faces.emplace_back(p00, p11, p10);
            faces.emplace_back(p00, p01, p11);
          }
        }
      }
    }
  }
  Faces F(static_cast<Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) F.row(static_cast<Index>(f)) = faces[f].transpose();
  return make_mesh(std::move(V), std::move(F));
}

Region cube_front_region(int face_resolution) {
  const int r = face_resolution;
  IndexList front;
  int v = 0;
  for (int k = 0; k <= r; ++k) {
    for (int j = 0; j <= r; ++j) {
      for (int i = 0; i <= r; ++i) {
        if (i == 0 || j == 0 || k == 0 || i == r || j == r || k == r) {
          if (k == r) front.push_back(v);
          ++v;
        }
      }
    }
  }
  return make_region(std::move(front), v, "front");
}

TrainTestSplit make_split(int count, std::uint64_t seed, double test_fraction) {
  if (count < 1) throw Error("cannot split an empty dataset");
  IndexList order(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  int n_test = static_cast<int>(std::lround(test_fraction * count));
  if (count > 1) n_test = std::clamp(n_test, 1, count - 1);
  TrainTestSplit split;
  split.test.assign(order.begin(), order.begin() + n_test);
  split.train.assign(order.begin() + n_test, order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Dataset generate_cube_dataset(const CubeDatasetOptions& options, std::uint64_t seed) {
  if (options.face_resolution < 8) {
    throw GeometryError("face resolution " + std::to_string(options.face_resolution) +
                        " too low; patterns need at least 8");
  }
  if (options.pattern_count < 1 || options.pattern_count > kPatternCount) {
    throw GeometryError("pattern count must lie in [1, " + std::to_string(kPatternCount) + "]");
  }
  const auto depths = depth_factors(options.depth_count);
  const Region front = cube_front_region(options.face_resolution);

  Dataset data;
  data.seed = seed;
  for (int p = 0; p < options.pattern_count; ++p) {
    for (double d : depths) {
      data.shapes.push_back(generate_cube({options.face_resolution, p, d, options.extrusion_height}));
      data.regions.push_back({front});
      data.info.push_back({p, d});
    }
  }
  data.split = make_split(static_cast<int>(data.shapes.size()), seed);
  return data;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "shapes");
  fs::create_directories(dir / "regions");

  // Regions shared by several shapes are written once.
  std::vector<std::pair<IndexList, std::string>> written;
  auto region_path = [&](const Region& region) {
    for (const auto& [indices, path] : written) {
      if (indices == region.indices) return path;
    }
    const std::string path = "regions/" + region.label + "_" + std::to_string(written.size()) + ".json";
    save_region(region, dir / path);
    written.emplace_back(region.indices, path);
    return path;
  };

  nlohmann::json shapes = nlohmann::json::array();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::string rel = "shapes/" + shape_filename(i, dataset.point_clouds);
    if (dataset.point_clouds) {
      save_point_cloud(PointCloud{dataset.shapes[i].vertices}, dir / rel);
    } else {
      save_mesh(dataset.shapes[i], dir / rel);
    }
    nlohmann::json entry{{"path", rel}};
    nlohmann::json regions = nlohmann::json::object();
    for (const auto& region : dataset.regions[i]) regions[region.label] = region_path(region);
    entry["regions"] = regions;
    if (i < dataset.info.size() && dataset.info[i].pattern_id >= 0) {
      entry["pattern_id"] = dataset.info[i].pattern_id;
      entry["depth_factor"] = dataset.info[i].depth_factor;
    }
    shapes.push_back(entry);
  }
  nlohmann::json manifest{{"format", "spectraforge-dataset"},
                          {"version", 1},
                          {"seed", dataset.seed},
                          {"kind", dataset.point_clouds ? "pointcloud" : "mesh"},
                          {"shapes", shapes},
                          {"split", {{"train", dataset.split.train}, {"test", dataset.split.test}}}};
  write_text_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir_or_manifest) {
  namespace fs = std::filesystem;
  const fs::path manifest_path =
      fs::is_directory(dir_or_manifest) ? dir_or_manifest / "manifest.json" : dir_or_manifest;
  const fs::path root = manifest_path.parent_path();
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what(), 0);
  }

  Dataset data;
  data.seed = m.value("seed", std::uint64_t{0});
  data.point_clouds = m.value("kind", std::string("mesh")) == "pointcloud";
  for (const auto& entry : m.at("shapes")) {
    const fs::path path = root / entry.at("path").get<std::string>();
    Mesh shape = data.point_clouds ? Mesh{load_point_cloud(path).vertices, Faces(0, 3)} : load_mesh(path);
    std::vector<Region> regions;
    const nlohmann::json region_entries = entry.value("regions", nlohmann::json::object());
    for (const auto& [label, rel] : region_entries.items()) {
      regions.push_back(load_region(root / rel.get<std::string>(), shape.num_vertices(), label));
    }
    data.info.push_back({entry.value("pattern_id", -1), entry.value("depth_factor", 0.0)});
    data.shapes.push_back(std::move(shape));
    data.regions.push_back(std::move(regions));
  }
  data.split.train = m.at("split").at("train").get<IndexList>();
  data.split.test = m.at("split").at("test").get<IndexList>();
  const int n = static_cast<int>(data.size());
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto* part : {&data.split.train, &data.split.test}) {
    for (int i : *part) {
      if (i < 0 || i >= n || seen[i]++) throw Error("manifest split is not a partition of the shapes");
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error("manifest split is not a partition of the shapes");
  }
  return data;
}

}  // namespace spectraforge

#pragma once

#include "spectraforge/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spectraforge {

enum class PatternFamily { Circle, Square, Ellipse, Rectangle };

std::string to_string(PatternFamily family);

/// Geometric parameters of one front-face pattern. `half_extent` is the
/// half size along the pattern's major axis, `aspect` the major/minor ratio,
/// `rotation` the angle in radians within [0, pi/4].
struct Pattern {
  PatternFamily family;
  double half_extent;
  double aspect;
  double rotation;
};

inline constexpr int kPatternCount = 125;
inline constexpr int kDepthCount = 8;

/// Enumerates the pattern grid:
///   ids   0..4    circle     5 sizes
///   ids   5..24   square     5 sizes x 4 rotations {0, 15, 30, 45} deg
///   ids  25..74   ellipse    5 sizes x 2 aspects {1.6, 2.4} x 5 rotations
///   ids  75..124  rectangle  5 sizes x 2 aspects x 5 rotations
/// with sizes {0.15, 0.18, 0.21, 0.24, 0.27} and rotations {0, 11.25, ..., 45} deg.
/// Rotations stay inside [0, 45] deg because the square face's dihedral
/// symmetry maps every other angle onto that range, which would make two
/// ids produce isometric cubes.
Pattern pattern(int pattern_id);

/// Height profile of a pattern at face coordinates (u, v) in [-0.5, 0.5]^2,
/// in [0, 1]: 1 on the plateau, a linear bevel near the outline, 0 outside.
double pattern_profile(const Pattern& p, double u, double v);

/// `count` evenly spaced depth factors over [0.6, 2.0].
std::vector<double> depth_factors(int count = kDepthCount);

struct CubeSpec {
  int face_resolution = 20;
  int pattern_id = 0;
  double depth_factor = 1.0;
  double extrusion_height = 0.15;
};

/// Unit cuboid with its front face (z = 0 plane) carrying the extruded
/// pattern; the body extends to z = -depth_factor. Every cube of a given
/// resolution shares one connectivity. Vertex count is 6 r^2 + 2.
Mesh generate_cube(const CubeSpec& spec);

/// Indices of the front-face vertices (identical for every cube of a resolution).
Region cube_front_region(int face_resolution);

struct TrainTestSplit {
  IndexList train;
  IndexList test;
};

/// Seeded 90/10 partition of [0, count), both lists sorted.
TrainTestSplit make_split(int count, std::uint64_t seed, double test_fraction = 0.1);

struct ShapeInfo {
  int pattern_id = -1;
  double depth_factor = 0.0;
};

struct Dataset {
  std::vector<Mesh> shapes;                 // point clouds carry no faces
  std::vector<std::vector<Region>> regions; // parallel to shapes
  std::vector<ShapeInfo> info;              // generator parameters, if known
  TrainTestSplit split;
  std::uint64_t seed = 0;
  bool point_clouds = false;

  std::size_t size() const { return shapes.size(); }
};

struct CubeDatasetOptions {
  int face_resolution = 20;
  int pattern_count = kPatternCount;  ///< first ids of the enumeration
  int depth_count = kDepthCount;
  double extrusion_height = 0.15;
};

/// pattern_count x depth_count cubes, ordered pattern-major.
Dataset generate_cube_dataset(const CubeDatasetOptions& options, std::uint64_t seed);

/// Writes shapes/, regions/ and manifest.json under `dir`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Accepts a directory containing manifest.json or the manifest path.
Dataset load_dataset(const std::filesystem::path& dir_or_manifest);

}  // namespace spectraforge

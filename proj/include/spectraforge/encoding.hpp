#pragma once

#include "spectraforge/geometry.hpp"

#include <Eigen/Core>

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace spectraforge {

inline constexpr const char* kGlobalLabel = "global";

struct Segment {
  std::string label;
  Index offset = 0;
  Index length = 0;

  bool operator==(const Segment&) const = default;
};

using Layout = std::vector<Segment>;

/// Total number of values covered by the layout.
Index layout_size(const Layout& layout);
/// "global:14,R:14"
std::string describe_layout(const Layout& layout);
/// Segments must tile [0, size) with distinct labels.
void validate_layout(const Layout& layout, Index size);

/// Concatenated difference vectors. The first segment is the global one.
struct SpectralEncoding {
  Eigen::VectorXd values;
  Layout layout;

  Index size() const { return values.size(); }
  const Segment& segment(const std::string& label) const;
  Eigen::VectorXd segment_values(const std::string& label) const;
};

using LabeledSpectrum = std::pair<std::string, Eigen::VectorXd>;

/// Consecutive differences of an ascending eigenvalue sequence.
Eigen::VectorXd diff_encode(const Eigen::VectorXd& eigenvalues);

SpectralEncoding build_encoding(const Eigen::VectorXd& global, const std::vector<LabeledSpectrum>& locals = {});

/// Splits an encoding back into its labeled difference vectors.
std::vector<LabeledSpectrum> split_segments(const SpectralEncoding& encoding);
/// Inverse of split_segments.
SpectralEncoding join_segments(const std::vector<LabeledSpectrum>& segments);

/// Copy of `a` with the segments named in `take_from_b` replaced by `b`'s.
SpectralEncoding swap_segments(const SpectralEncoding& a, const SpectralEncoding& b,
                               const std::set<std::string>& take_from_b);

/// (1-t) a + t b on the selected segments, `a` elsewhere. An empty label
/// set selects every segment.
SpectralEncoding interpolate(const SpectralEncoding& a, const SpectralEncoding& b, double t,
                             const std::set<std::string>& segments = {});

void require_same_layout(const Layout& expected, const Layout& actual, const std::string& context);

struct EncodingStats {
  Layout layout;
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

EncodingStats dataset_stats(const std::vector<SpectralEncoding>& encodings);

/// Encoding assembled from per-dimension extremes, e.g. global at the
/// minimum and one region at the maximum.
SpectralEncoding mix_extremes(const EncodingStats& stats, const std::set<std::string>& at_max);

std::string encoding_to_json(const SpectralEncoding& encoding);
SpectralEncoding encoding_from_json(const std::string& text);
std::string stats_to_json(const EncodingStats& stats);
EncodingStats stats_from_json(const std::string& text);

}  // namespace spectraforge

#include "spectraforge/encoding.hpp"

#include "json_support.hpp"

#include <algorithm>

namespace spectraforge {
namespace {

void check_labels(const Layout& layout, const std::set<std::string>& labels) {
  for (const auto& label : labels) {
    const bool known = std::any_of(layout.begin(), layout.end(), [&](const Segment& s) { return s.label == label; });
    if (!known) throw Error("unknown encoding segment '" + label + "' (layout " + describe_layout(layout) + ")");
  }
}

}  // namespace

void validate_layout(const Layout& layout, Index size) {
  Index offset = 0;
  std::set<std::string> seen;
  for (const Segment& s : layout) {
    if (s.offset != offset || s.length < 1) throw Error("encoding segments must tile the vector: " + describe_layout(layout));
    if (!seen.insert(s.label).second) throw Error("duplicate encoding segment label '" + s.label + "'");
    offset += s.length;
  }
  if (offset != size) {
    throw Error("encoding layout covers " + std::to_string(offset) + " values but the vector has " +
                std::to_string(size));
  }
}

Index layout_size(const Layout& layout) {
  Index total = 0;
  for (const Segment& s : layout) total += s.length;
  return total;
}

std::string describe_layout(const Layout& layout) {
  std::string out;
  for (const Segment& s : layout) {
    if (!out.empty()) out += ",";
    out += s.label + ":" + std::to_string(s.length);
  }
  return out;
}

const Segment& SpectralEncoding::segment(const std::string& label) const {
  for (const Segment& s : layout) {
    if (s.label == label) return s;
  }
  throw Error("unknown encoding segment '" + label + "' (layout " + describe_layout(layout) + ")");
}

Eigen::VectorXd SpectralEncoding::segment_values(const std::string& label) const {
  const Segment& s = segment(label);
  return values.segment(s.offset, s.length);
}

Eigen::VectorXd diff_encode(const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() < 2) {
    throw Error("a spectrum needs at least 2 eigenvalues to difference, got " + std::to_string(eigenvalues.size()));
  }
  const Index n = eigenvalues.size();
  Eigen::VectorXd d = eigenvalues.tail(n - 1) - eigenvalues.head(n - 1);
  if ((d.array() < 0.0).any()) throw Error("eigenvalues must be sorted in ascending order");
  return d;
}

SpectralEncoding build_encoding(const Eigen::VectorXd& global, const std::vector<LabeledSpectrum>& locals) {
  std::vector<LabeledSpectrum> parts;
  parts.emplace_back(kGlobalLabel, diff_encode(global));
  for (const auto& [label, spectrum] : locals) {
    if (label.empty() || label == kGlobalLabel) throw Error("invalid region label '" + label + "'");
    parts.emplace_back(label, diff_encode(spectrum));
  }
  return join_segments(parts);
}

std::vector<LabeledSpectrum> split_segments(const SpectralEncoding& encoding) {
  validate_layout(encoding.layout, encoding.size());
  std::vector<LabeledSpectrum> out;
  for (const Segment& s : encoding.layout) out.emplace_back(s.label, encoding.values.segment(s.offset, s.length));
  return out;
}

SpectralEncoding join_segments(const std::vector<LabeledSpectrum>& segments) {
  SpectralEncoding out;
  Index total = 0;
  for (const auto& [label, values] : segments) {
    out.layout.push_back({label, total, values.size()});
    total += values.size();
  }
  out.values.resize(total);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out.values.segment(out.layout[i].offset, out.layout[i].length) = segments[i].second;
  }
  validate_layout(out.layout, total);
  return out;
}

void require_same_layout(const Layout& expected, const Layout& actual, const std::string& context) {
  if (expected != actual) {
    throw Error(context + ": encoding layout " + describe_layout(actual) + " does not match expected " +
                describe_layout(expected));
  }
}

SpectralEncoding swap_segments(const SpectralEncoding& a, const SpectralEncoding& b,
                               const std::set<std::string>& take_from_b) {
  require_same_layout(a.layout, b.layout, "swap");
  check_labels(a.layout, take_from_b);
  SpectralEncoding out = a;
  for (const Segment& s : a.layout) {
    if (take_from_b.count(s.label)) out.values.segment(s.offset, s.length) = b.values.segment(s.offset, s.length);
  }
  return out;
}

SpectralEncoding interpolate(const SpectralEncoding& a, const SpectralEncoding& b, double t,
                             const std::set<std::string>& segments) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error("interpolation parameter must lie in [0, 1]");
  require_same_layout(a.layout, b.layout, "interpolate");
  check_labels(a.layout, segments);
  SpectralEncoding out = a;
  for (const Segment& s : a.layout) {
    if (segments.empty() || segments.count(s.label)) {
      out.values.segment(s.offset, s.length) =
          (1.0 - t) * a.values.segment(s.offset, s.length) + t * b.values.segment(s.offset, s.length);
    }
  }
  return out;
}

EncodingStats dataset_stats(const std::vector<SpectralEncoding>& encodings) {
  if (encodings.empty()) throw Error("cannot compute statistics of an empty encoding set");
  EncodingStats stats;
  stats.layout = encodings.front().layout;
  stats.min = encodings.front().values;
  stats.max = encodings.front().values;
  for (const auto& e : encodings) {
    require_same_layout(stats.layout, e.layout, "statistics");
    stats.min = stats.min.cwiseMin(e.values);
    stats.max = stats.max.cwiseMax(e.values);
  }
  return stats;
}

SpectralEncoding mix_extremes(const EncodingStats& stats, const std::set<std::string>& at_max) {
  check_labels(stats.layout, at_max);
  SpectralEncoding out{stats.min, stats.layout};
  for (const Segment& s : stats.layout) {
    if (at_max.count(s.label)) out.values.segment(s.offset, s.length) = stats.max.segment(s.offset, s.length);
  }
  return out;
}

std::string encoding_to_json(const SpectralEncoding& encoding) {
  const nlohmann::json j{{"layout", encoding.layout}, {"values", vector_to_json(encoding.values)}};
  return j.dump();
}

SpectralEncoding encoding_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SpectralEncoding e;
    e.values = vector_from_json(j.at("values"));
    e.layout = j.at("layout").get<Layout>();
    validate_layout(e.layout, e.size());
    return e;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("encoding JSON: ") + e.what(), 0);
  }
}

std::string stats_to_json(const EncodingStats& stats) { return stats_json(stats).dump(); }

EncodingStats stats_from_json(const std::string& text) {
  try {
    return stats_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("statistics JSON: ") + e.what(), 0);
  }
}

}  // namespace spectraforge

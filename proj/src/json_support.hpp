#pragma once

// nlohmann adapters shared by the serializers. Not installed.

#include "spectraforge/encoding.hpp"
#include "spectraforge/pipeline.hpp"

#include "json.hpp"

namespace spectraforge {

inline void to_json(nlohmann::json& j, const Segment& s) {
  j = nlohmann::json{{"label", s.label}, {"offset", s.offset}, {"length", s.length}};
}

inline void from_json(const nlohmann::json& j, Segment& s) {
  j.at("label").get_to(s.label);
  j.at("offset").get_to(s.offset);
  j.at("length").get_to(s.length);
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error("expected a number at position " + std::to_string(i));
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline nlohmann::json stats_json(const EncodingStats& stats) {
  return {{"layout", stats.layout}, {"min", vector_to_json(stats.min)}, {"max", vector_to_json(stats.max)}};
}

inline EncodingStats stats_from(const nlohmann::json& j) {
  EncodingStats s;
  s.layout = j.at("layout").get<Layout>();
  s.min = vector_from_json(j.at("min"));
  s.max = vector_from_json(j.at("max"));
  if (s.min.size() != layout_size(s.layout) || s.max.size() != s.min.size()) {
    throw Error("encoding statistics do not match their layout");
  }
  return s;
}

inline void to_json(nlohmann::json& j, const EncodingRecipe& r) {
  j = nlohmann::json{{"local", r.local ? to_string(*r.local) : "none"},
                     {"k", r.k},
                     {"h", r.h},
                     {"potential_scale", r.potential_scale},
                     {"orthogonality_scale", r.orthogonality_scale},
                     {"neighbors", r.neighbors},
                     {"seed", r.seed}};
}

inline void from_json(const nlohmann::json& j, EncodingRecipe& r) {
  const std::string local = j.at("local").get<std::string>();
  r.local = local == "none" ? std::nullopt : std::optional<LocalOperator>(parse_local_operator(local));
  j.at("k").get_to(r.k);
  j.at("h").get_to(r.h);
  j.at("potential_scale").get_to(r.potential_scale);
  j.at("orthogonality_scale").get_to(r.orthogonality_scale);
  j.at("neighbors").get_to(r.neighbors);
  j.at("seed").get_to(r.seed);
}

}  // namespace spectraforge

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mctrack/error.hpp"
#include "mctrack/stochastic_matrix.hpp"

namespace mctrack {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  void validate() const {
    if (!(lat >= -90.0 && lat <= 90.0))
      throw ValidationError("latitude out of range [-90, 90]: " + io::format_double(lat));
    if (!(lon >= -180.0 && lon <= 180.0))
      throw ValidationError("longitude out of range [-180, 180]: " + io::format_double(lon));
  }
};

// Planar working frame, meters east (x) and north (y) of the map origin.
struct LocalPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const LocalPoint&, const LocalPoint&) = default;
};

inline double distance(LocalPoint a, LocalPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// Equirectangular projection about `origin`. Distortion stays below a
// centimetre over campus-sized (< 2 km) extents.
inline LocalPoint project(const GeoPoint& p, const GeoPoint& origin) {
  p.validate();
  origin.validate();
  return {kEarthRadiusM * std::cos(deg2rad(origin.lat)) * deg2rad(p.lon - origin.lon),
          kEarthRadiusM * deg2rad(p.lat - origin.lat)};
}

inline GeoPoint unproject(const LocalPoint& q, const GeoPoint& origin) {
  return {origin.lat + rad2deg(q.y / kEarthRadiusM),
          origin.lon + rad2deg(q.x / (kEarthRadiusM * std::cos(deg2rad(origin.lat))))};
}

struct Vertex {
  int id = 0;
  LocalPoint position;
  std::string label;
};

using Edge = std::pair<int, int>;

// Simple undirected graph over dense vertex ids 0..n-1. Immutable once built.
class PathGraph {
 public:
  PathGraph(std::vector<Vertex> vertices, std::vector<Edge> edges) : vertices_(std::move(vertices)) {
    std::sort(vertices_.begin(), vertices_.end(),
              [](const Vertex& a, const Vertex& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const auto& v = vertices_[i];
      if (v.id != static_cast<int>(i)) {
        if (i > 0 && vertices_[i - 1].id == v.id)
          throw ValidationError("duplicate vertex id " + std::to_string(v.id));
        throw ValidationError("vertex ids must be contiguous from 0; missing id " + std::to_string(i));
      }
      if (!std::isfinite(v.position.x) || !std::isfinite(v.position.y))
        throw ValidationError("vertex " + std::to_string(v.id) + " has a non-finite coordinate");
    }
    const int n = size();
    adjacency_.assign(n, {});
    std::set<Edge> seen;
    for (auto [a, b] : edges) {
      if (a < 0 || a >= n || b < 0 || b >= n)
        throw ValidationError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                              ") references a missing vertex");
      if (a == b) throw ValidationError("self-loop at vertex " + std::to_string(a));
      const Edge key{std::min(a, b), std::max(a, b)};
      if (!seen.insert(key).second)
        throw ValidationError("duplicate edge (" + std::to_string(key.first) + "," +
                              std::to_string(key.second) + ")");
      edges_.push_back(key);
      adjacency_[a].push_back(b);
      adjacency_[b].push_back(a);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
  }

  int size() const { return static_cast<int>(vertices_.size()); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vertex& vertex(int id) const { return vertices_.at(id); }
  LocalPoint position(int id) const { return vertices_.at(id).position; }
  const std::vector<int>& neighbors(int id) const { return adjacency_.at(id); }
  int degree(int id) const { return static_cast<int>(adjacency_.at(id).size()); }

  bool has_edge(int a, int b) const {
    const auto& nb = adjacency_.at(a);
    return std::binary_search(nb.begin(), nb.end(), b);
  }

 private:
  std::vector<Vertex> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

// Sum of vertex degrees. Graphs are loop-free, so this is exactly 2|E|.
inline long long degree_sum(const PathGraph& g) {
  long long s = 0;
  for (int v = 0; v < g.size(); ++v) s += g.degree(v);
  return s;
}

// Simple random walk: move to each neighbour with equal probability.
inline StochasticMatrix random_walk_matrix(const PathGraph& g) {
  const int n = g.size();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& nb = g.neighbors(i);
    if (nb.empty())
      throw ValidationError("vertex " + std::to_string(i) + " is isolated; no random-walk row exists");
    const double w = 1.0 / static_cast<double>(nb.size());
    for (int j : nb) p(i, j) = w;
  }
  return StochasticMatrix(std::move(p));
}

namespace detail {

inline double require_number(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline int require_int(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + " must be an integer");
  return v.get<int>();
}

}  // namespace detail

struct LoadedMap {
  PathGraph graph;
  std::optional<GeoPoint> origin;  // set when vertices were given geodetically
};

// Parses the JSON map document. Vertices carry either {lat, lon} or {x, y};
// mixing the two styles is rejected. Without an explicit origin, geodetic
// maps are projected about the first listed vertex.
inline LoadedMap load_map_document(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("map: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("map: top level must be an object");
  if (!doc.contains("vertices") || !doc["vertices"].is_array())
    throw ParseError("map: field 'vertices' must be an array");
  if (!doc.contains("edges") || !doc["edges"].is_array())
    throw ParseError("map: field 'edges' must be an array");

  std::optional<GeoPoint> origin;
  if (doc.contains("origin")) {
    const auto& o = doc["origin"];
    if (!o.is_object()) throw ParseError("map: field 'origin' must be an object");
    origin = GeoPoint{detail::require_number(o, "lat", "map.origin"),
                      detail::require_number(o, "lon", "map.origin")};
    origin->validate();
  }

  enum class Style { unknown, geodetic, planar } style = Style::unknown;
  std::vector<Vertex> vertices;
  std::vector<GeoPoint> geo;
  const auto& vs = doc["vertices"];
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto where = "map.vertices[" + std::to_string(i) + "]";
    const auto& v = vs[i];
    if (!v.is_object()) throw ParseError(where + " must be an object");
    if (!v.contains("id")) throw ParseError(where + ": missing field 'id'");
    Vertex out;
    out.id = detail::require_int(v["id"], where + ".id");
    if (v.contains("label")) {
      if (!v["label"].is_string()) throw ParseError(where + ": field 'label' must be a string");
      out.label = v["label"].get<std::string>();
    }
    const bool has_geo = v.contains("lat") || v.contains("lon");
    const bool has_xy = v.contains("x") || v.contains("y");
    if (has_geo && has_xy) throw ParseError(where + ": mixes lat/lon with x/y");
    if (!has_geo && !has_xy) throw ParseError(where + ": needs either lat/lon or x/y");
    const Style s = has_geo ? Style::geodetic : Style::planar;
    if (style != Style::unknown && style != s)
      throw ParseError(where + ": mixed coordinate styles in one map are not allowed");
    style = s;
    if (has_geo) {
      GeoPoint gp{detail::require_number(v, "lat", where), detail::require_number(v, "lon", where)};
      try {
        gp.validate();
      } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
      }
      geo.push_back(gp);
    } else {
      out.position = {detail::require_number(v, "x", where), detail::require_number(v, "y", where)};
    }
    vertices.push_back(std::move(out));
  }

  if (style == Style::geodetic) {
    if (!origin) origin = geo.front();
    for (std::size_t i = 0; i < vertices.size(); ++i) vertices[i].position = project(geo[i], *origin);
  } else {
    origin.reset();
  }

  std::vector<Edge> edges;
  const auto& es = doc["edges"];
  for (std::size_t i = 0; i < es.size(); ++i) {
    const auto where = "map.edges[" + std::to_string(i) + "]";
    if (!es[i].is_array() || es[i].size() != 2) throw ParseError(where + " must be a pair [a, b]");
    edges.emplace_back(detail::require_int(es[i][0], where + "[0]"),
                       detail::require_int(es[i][1], where + "[1]"));
  }
  return {PathGraph(std::move(vertices), std::move(edges)), origin};
}

inline PathGraph load_map(const std::string& text) { return load_map_document(text).graph; }

}  // namespace mctrack

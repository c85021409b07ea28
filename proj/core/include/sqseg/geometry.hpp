#pragma once

#include <vector>

#include <json.hpp>

#include "sqseg/mask.hpp"

namespace sqseg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Vertex list in pixel-corner coordinates: pixel (x, y) covers the unit
/// square [x, x+1) x [y, y+1) and its center is (x + 0.5, y + 0.5).
struct Polygon {
  std::vector<Point2> vertices;
  bool closed = true;

  /// Shoelace area; positive for outer boundaries produced by
  /// mask_to_polygons, negative for holes.
  double signed_area() const;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// Distance from `p` to the closed segment [a, b].
double point_segment_distance(const Point2& p, const Point2& a, const Point2& b);

/// Traces pixel-edge boundaries. Components are 8-connected: each yields one
/// positively oriented outer ring, and every enclosed background region
/// yields one negatively oriented hole ring. Collinear vertices are merged.
std::vector<Polygon> mask_to_polygons(const BinaryMask& mask);

/// Even-odd fill sampled at pixel centers. Every polygon is treated as closed;
/// geometry outside the canvas is clipped.
BinaryMask polygons_to_mask(const std::vector<Polygon>& polygons, int width, int height);

/// Douglas-Peucker decimation. Output vertices are a subsequence of the input.
/// Closed rings are split at their two mutually farthest vertices and each
/// chain is simplified separately; a ring never drops below three vertices.
Polygon approximate_polygon(const Polygon& polygon, double epsilon);

void to_json(nlohmann::json& j, const Point2& p);
void from_json(const nlohmann::json& j, Point2& p);
void to_json(nlohmann::json& j, const Polygon& polygon);
void from_json(const nlohmann::json& j, Polygon& polygon);

}  // namespace sqseg

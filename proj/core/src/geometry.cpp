#include "sqseg/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace sqseg {

double Polygon::signed_area() const {
  double twice = 0.0;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = vertices[i];
    const auto& b = vertices[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

namespace {

struct Edge {
  int x0, y0, x1, y1;
};

int cross(int ax, int ay, int bx, int by) { return ax * by - ay * bx; }

// Drops vertices that lie strictly between their neighbours on a straight
// line, including across the wrap-around of a ring.
bool passes_straight(const Point2& a, const Point2& b, const Point2& c) {
  const double cr = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
  const double dot = (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y);
  return cr == 0.0 && dot > 0.0;
}

std::vector<Point2> merge_collinear(const std::vector<Point2>& ring) {
  std::vector<Point2> out;
  out.reserve(ring.size());
  for (const auto& p : ring) {
    while (out.size() >= 2 && passes_straight(out[out.size() - 2], out.back(), p)) out.pop_back();
    out.push_back(p);
  }
  std::size_t front = 0;
  bool changed = true;
  while (changed && out.size() - front > 3) {
    changed = false;
    if (passes_straight(out[out.size() - 2], out.back(), out[front])) {
      out.pop_back();
      changed = true;
    } else if (passes_straight(out.back(), out[front], out[front + 1])) {
      ++front;
      changed = true;
    }
  }
  return {out.begin() + static_cast<std::ptrdiff_t>(front), out.end()};
}

}  // namespace

std::vector<Polygon> mask_to_polygons(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  const int vw = w + 1;

  // Directed pixel-edge boundary, foreground kept on the same side so outer
  // rings come out with positive shoelace area in (x right, y down) coords.
  std::vector<Edge> edges;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      if (!mask.get(x, y - 1)) edges.push_back({x, y, x + 1, y});
      if (!mask.get(x + 1, y)) edges.push_back({x + 1, y, x + 1, y + 1});
      if (!mask.get(x, y + 1)) edges.push_back({x + 1, y + 1, x, y + 1});
      if (!mask.get(x - 1, y)) edges.push_back({x, y + 1, x, y});
    }
  }

  // At most two boundary edges leave any lattice vertex.
  std::vector<std::array<int, 2>> outgoing(static_cast<std::size_t>(vw) * (h + 1), {-1, -1});
  for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
    auto& slot = outgoing[static_cast<std::size_t>(edges[i].y0) * vw + edges[i].x0];
    (slot[0] < 0 ? slot[0] : slot[1]) = i;
  }

  std::vector<char> used(edges.size(), 0);
  std::vector<Polygon> polygons;
  for (int start = 0; start < static_cast<int>(edges.size()); ++start) {
    if (used[start]) continue;
    std::vector<Point2> ring;
    int cur = start;
    do {
      used[cur] = 1;
      const Edge& e = edges[cur];
      ring.push_back({static_cast<double>(e.x0), static_cast<double>(e.y0)});
      const auto& slot = outgoing[static_cast<std::size_t>(e.y1) * vw + e.x1];
      int next = slot[0];
      if (slot[1] >= 0) {
        // Checkerboard vertex: turn so diagonal neighbours join one ring
        // (8-connected foreground, 4-connected background).
        const int dx = e.x1 - e.x0, dy = e.y1 - e.y0;
        const Edge& a = edges[slot[0]];
        if (cross(dx, dy, a.x1 - a.x0, a.y1 - a.y0) != -1) next = slot[1];
      }
      cur = next;
    } while (cur != start);

    Polygon poly;
    poly.vertices = merge_collinear(ring);
    poly.closed = true;
    polygons.push_back(std::move(poly));
  }
  return polygons;
}

BinaryMask polygons_to_mask(const std::vector<Polygon>& polygons, int width, int height) {
  BinaryMask out(width, height);
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    const double yc = y + 0.5;
    xs.clear();
    for (const auto& poly : polygons) {
      const auto& v = poly.vertices;
      const std::size_t n = v.size();
      if (n < 2) continue;
      for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = v[i];
        const Point2& b = v[(i + 1) % n];
        if ((a.y <= yc) == (b.y <= yc)) continue;
        xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // pixel x is inside when xa <= x + 0.5 < xb
      const double lo = std::ceil(xs[k] - 0.5);
      const double hi = std::ceil(xs[k + 1] - 0.5);
      const int x0 = static_cast<int>(std::max(lo, 0.0));
      const int x1 = static_cast<int>(std::min(hi, static_cast<double>(width)));
      for (int x = x0; x < x1; ++x) out.set(x, y);
    }
  }
  return out;
}

namespace {

// Marks the vertices of open chain [first, last] that survive decimation.
// Iterative to stay safe on long boundaries.
void douglas_peucker(const std::vector<Point2>& pts, std::size_t first, std::size_t last,
                     double epsilon, std::vector<char>& keep) {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    keep[i % pts.size()] = 1;
    keep[j % pts.size()] = 1;
    if (j <= i + 1) continue;
    double best = -1.0;
    std::size_t split = i;
    for (std::size_t k = i + 1; k < j; ++k) {
      const double d = point_segment_distance(pts[k % pts.size()], pts[i % pts.size()],
                                              pts[j % pts.size()]);
      if (d > best) {
        best = d;
        split = k;
      }
    }
    if (best > epsilon) {
      stack.push_back({split, j});
      stack.push_back({i, split});
    }
  }
}

std::vector<Point2> drop_repeats(const std::vector<Point2>& in, bool closed) {
  std::vector<Point2> out;
  for (const auto& p : in)
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  if (closed)
    while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

// Indices of the two mutually farthest vertices, lowest index pair on ties.
// Candidates are restricted to the convex hull, which contains the diameter.
std::pair<std::size_t, std::size_t> farthest_pair(const std::vector<Point2>& pts) {
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].x != pts[b].x) return pts[a].x < pts[b].x;
    if (pts[a].y != pts[b].y) return pts[a].y < pts[b].y;
    return a < b;
  });
  auto turn = [&](std::size_t o, std::size_t a, std::size_t b) {
    return (pts[a].x - pts[o].x) * (pts[b].y - pts[o].y) -
           (pts[a].y - pts[o].y) * (pts[b].x - pts[o].x);
  };
  std::vector<std::size_t> hull(2 * order.size());
  std::size_t k = 0;
  for (std::size_t idx : order) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], idx) <= 0) --k;
    hull[k++] = idx;
  }
  for (std::size_t t = order.size() - 1, lower = k + 1; t-- > 0;) {
    const std::size_t idx = order[t];
    while (k >= lower && turn(hull[k - 2], hull[k - 1], idx) <= 0) --k;
    hull[k++] = idx;
  }
  hull.resize(k > 1 ? k - 1 : k);
  std::sort(hull.begin(), hull.end());
  hull.erase(std::unique(hull.begin(), hull.end()), hull.end());

  std::pair<std::size_t, std::size_t> best{0, pts.size() > 1 ? 1 : 0};
  double best_d = -1.0;
  for (std::size_t a = 0; a < hull.size(); ++a)
    for (std::size_t b = a + 1; b < hull.size(); ++b) {
      const double dx = pts[hull[a]].x - pts[hull[b]].x;
      const double dy = pts[hull[a]].y - pts[hull[b]].y;
      const double d = dx * dx + dy * dy;
      if (d > best_d) {
        best_d = d;
        best = {hull[a], hull[b]};
      }
    }
  return best;
}

}  // namespace

Polygon approximate_polygon(const Polygon& polygon, double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("approximate_polygon: epsilon must be >= 0");
  const std::vector<Point2> pts = drop_repeats(polygon.vertices, polygon.closed);
  Polygon out;
  out.closed = polygon.closed;
  const std::size_t n = pts.size();
  if (n <= 2 || (polygon.closed && n <= 3)) {
    out.vertices = pts;
    return out;
  }

  std::vector<char> keep(n, 0);
  if (!polygon.closed) {
    douglas_peucker(pts, 0, n - 1, epsilon, keep);
  } else {
    auto [a, b] = farthest_pair(pts);
    if (a > b) std::swap(a, b);
    // Chains a..b and b..a (wrapping); indices beyond n wrap via modulo.
    douglas_peucker(pts, a, b, epsilon, keep);
    douglas_peucker(pts, b, a + n, epsilon, keep);
    if (std::count(keep.begin(), keep.end(), 1) < 3) {
      // Both chains collapsed onto the chord: force a split at the vertex
      // farthest from it, then simplify the two halves of that chain.
      double best = -1.0;
      std::size_t split = a, lo = a, hi = b;
      for (auto [i, j] : {std::pair{a, b}, std::pair{b, a + n}})
        for (std::size_t k = i + 1; k < j; ++k) {
          const double d = point_segment_distance(pts[k % n], pts[a], pts[b]);
          if (d > best) {
            best = d;
            split = k;
            lo = i;
            hi = j;
          }
        }
      if (best > 0.0) {
        douglas_peucker(pts, lo, split, epsilon, keep);
        douglas_peucker(pts, split, hi, epsilon, keep);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.vertices.push_back(pts[i]);
  return out;
}

void to_json(nlohmann::json& j, const Point2& p) { j = nlohmann::json::array({p.x, p.y}); }

void from_json(const nlohmann::json& j, Point2& p) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument("vertex must be a two-element array [x, y]");
  p.x = j.at(0).get<double>();
  p.y = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const Polygon& polygon) {
  j = nlohmann::json{{"vertices", polygon.vertices}, {"closed", polygon.closed}};
}

void from_json(const nlohmann::json& j, Polygon& polygon) {
  polygon.vertices = j.at("vertices").get<std::vector<Point2>>();
  polygon.closed = j.value("closed", true);
}

}  // namespace sqseg

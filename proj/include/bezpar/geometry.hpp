#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace bezpar {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  Vec2& operator/=(double s) { x /= s; y /= s; return *this; }
};

using Point2 = Vec2;

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(Vec2 a, double s) { return a *= s; }
inline Vec2 operator*(double s, Vec2 a) { return a *= s; }
inline Vec2 operator/(Vec2 a, double s) { return a /= s; }
inline Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
inline bool operator==(const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }
inline bool operator!=(const Vec2& a, const Vec2& b) { return !(a == b); }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm2(const Vec2& a) { return dot(a, a); }
inline double norm(const Vec2& a) { return std::sqrt(norm2(a)); }
inline double dist(const Vec2& a, const Vec2& b) { return norm(a - b); }

inline bool finite(const Vec2& a) { return std::isfinite(a.x) && std::isfinite(a.y); }

// Distance from p to the infinite line through a and b. Falls back to
// dist(p, a) when the line is degenerate.
inline double dist_to_line(const Point2& p, const Point2& a, const Point2& b) {
  const Vec2 d = b - a;
  const double len = norm(d);
  if (len < 1e-300) return dist(p, a);
  return std::abs(cross(d, p - a)) / len;
}

// Distance from p to the closed segment [a, b].
inline double dist_to_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Vec2 d = b - a;
  const double l2 = norm2(d);
  if (l2 < 1e-300) return dist(p, a);
  double t = dot(p - a, d) / l2;
  t = std::max(0.0, std::min(1.0, t));
  return dist(p, a + t * d);
}

// 2x signed area of triangle (a, b, c); positive when CCW.
inline double orient2d(const Point2& a, const Point2& b, const Point2& c) {
  return cross(b - a, c - a);
}

// Proper crossing: the open interiors of segments (a,b) and (c,d) intersect.
inline bool segments_cross(const Point2& a, const Point2& b, const Point2& c,
                           const Point2& d) {
  const double d1 = orient2d(c, d, a);
  const double d2 = orient2d(c, d, b);
  const double d3 = orient2d(a, b, c);
  const double d4 = orient2d(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

// Even-odd point-in-polygon with the half-open edge rule; coincident twin
// edges of a slit cancel pairwise.
inline bool point_in_polygon(const Point2& p, const std::vector<Point2>& poly) {
  bool inside = false;
  const std::size_t m = poly.size();
  for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
    const Point2& pi = poly[i];
    const Point2& pj = poly[j];
    if ((pi.y > p.y) != (pj.y > p.y)) {
      const double xi = pj.x + (p.y - pj.y) / (pi.y - pj.y) * (pi.x - pj.x);
      if (p.x < xi) inside = !inside;
    }
  }
  return inside;
}

inline double polygon_signed_area(const std::vector<Point2>& poly) {
  double a = 0.0;
  const std::size_t m = poly.size();
  for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
    a += cross(poly[j], poly[i]);
  }
  return 0.5 * a;
}

struct BBox {
  Point2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  Point2 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  void expand(const Point2& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  double diag() const { return dist(lo, hi); }
};

}  // namespace bezpar

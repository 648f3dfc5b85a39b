#include "bezpar/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace bezpar {

namespace {

std::string msg(const std::string& s) { return "bspline: " + s; }

}  // namespace

void BSplineCurve::validate() const {
  const int p = degree;
  const std::size_t ncp = control_points.size();
  const std::size_t nk = knots.size();
  if (p < 1) throw std::invalid_argument(msg("degree must be >= 1"));
  if (ncp < static_cast<std::size_t>(p) + 1)
    throw std::invalid_argument(msg("too few control points for degree"));
  if (nk != ncp + p + 1)
    throw std::invalid_argument(msg("knot count must equal #control_points + degree + 1"));
  for (std::size_t i = 1; i < nk; ++i)
    if (knots[i] < knots[i - 1])
      throw std::invalid_argument(msg("knot vector must be non-decreasing"));
  for (int i = 0; i <= p; ++i) {
    if (knots[i] != knots[0] || knots[nk - 1 - i] != knots[nk - 1])
      throw std::invalid_argument(msg("knot vector must be clamped (open)"));
  }
  if (knots[0] == knots[nk - 1]) throw std::invalid_argument(msg("empty knot range"));
  // Interior multiplicities at most p.
  std::size_t i = p + 1;
  while (i + p + 1 < nk) {
    std::size_t j = i;
    while (j + p + 1 < nk && knots[j] == knots[i]) ++j;
    if (j - i > static_cast<std::size_t>(p))
      throw std::invalid_argument(msg("interior knot multiplicity exceeds degree"));
    i = j;
  }
  for (const Point2& q : control_points)
    if (!finite(q)) throw std::invalid_argument(msg("non-finite control point"));
}

namespace {

// Single Boehm knot insertion of u into (p, knots, cps).
void insert_knot(int p, std::vector<double>& knots, std::vector<Point2>& cps, double u) {
  // Span k with knots[k] <= u < knots[k+1]; u strictly inside the range here.
  int k = -1;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (knots[i] <= u && u < knots[i + 1]) k = static_cast<int>(i);
  }
  if (k < 0) throw std::logic_error("insert_knot: parameter outside knot range");

  std::vector<Point2> out(cps.size() + 1);
  for (int i = 0; i <= k - p; ++i) out[i] = cps[i];
  for (int i = k - p + 1; i <= k; ++i) {
    const double den = knots[i + p] - knots[i];
    const double a = den > 0.0 ? (u - knots[i]) / den : 0.0;
    out[i] = (1.0 - a) * cps[i - 1] + a * cps[i];
  }
  for (std::size_t i = k + 1; i < out.size(); ++i) out[i] = cps[i - 1];

  knots.insert(knots.begin() + (k + 1), u);
  cps = std::move(out);
}

}  // namespace

std::vector<BezierCurve> bezier_extract(const BSplineCurve& c) {
  c.validate();
  const int p = c.degree;
  std::vector<double> knots = c.knots;
  std::vector<Point2> cps = c.control_points;

  // Raise every distinct interior knot to multiplicity p.
  std::size_t i = p + 1;
  while (i + static_cast<std::size_t>(p) + 1 < knots.size()) {
    const double u = knots[i];
    std::size_t mult = 0;
    while (i + mult < knots.size() && knots[i + mult] == u) ++mult;
    for (std::size_t r = mult; r < static_cast<std::size_t>(p); ++r)
      insert_knot(p, knots, cps, u);
    // Skip past this knot at its new multiplicity p.
    while (i < knots.size() && knots[i] == u) ++i;
  }

  // Consecutive groups of p+1 control points, advancing by p per span.
  std::vector<BezierCurve> out;
  const std::size_t nseg = (cps.size() - 1) / p;
  for (std::size_t s = 0; s < nseg; ++s) {
    std::vector<Point2> seg(cps.begin() + s * p, cps.begin() + s * p + p + 1);
    out.emplace_back(std::move(seg));
  }
  return out;
}

double chord_deviation(const BezierCurve& c) {
  if (c.degree() < 1) throw std::domain_error("chord_deviation: degree < 1");
  const Point2& a = c.pts.front();
  const Point2& b = c.pts.back();
  BBox box;
  for (const Point2& q : c.pts) box.expand(q);
  const double scale = std::max(box.diag(), 1e-300);
  double dmax = 0.0;
  if (dist(a, b) < 1e-12 * scale) {
    for (const Point2& q : c.pts) dmax = std::max(dmax, dist(q, a));
  } else {
    for (const Point2& q : c.pts) dmax = std::max(dmax, dist_to_line(q, a, b));
  }
  return dmax;
}

int subdivision_depth(const BezierCurve& c, double l_ave) {
  if (!(l_ave > 0.0)) throw std::domain_error("subdivision_depth: l_ave must be > 0");
  const int n = c.degree();
  if (n < 2) return 0;
  double eta = 0.0;
  for (int i = 0; i + 2 <= n; ++i) {
    const Vec2 d2 = c.pts[i] - 2.0 * c.pts[i + 1] + c.pts[i + 2];
    eta = std::max(eta, std::max(std::abs(d2.x), std::abs(d2.y)));
  }
  if (eta <= 0.0) return 0;
  const double ratio = std::sqrt(3.0) * n * (n - 1) * eta / (8.0 * l_ave);
  if (ratio <= 1.0) return 0;
  const int depth = static_cast<int>(std::ceil(std::log(ratio) / std::log(4.0) - 1e-12));
  return std::max(0, depth);
}

namespace {

std::vector<Point2> sample_loop(const BoundaryLoop& loop, int per_piece) {
  std::vector<Point2> pts;
  for (const BSplineCurve& piece : loop.pieces) {
    for (const BezierCurve& seg : bezier_extract(piece)) {
      for (int k = 0; k < per_piece; ++k)
        pts.push_back(seg.eval(static_cast<double>(k) / per_piece));
    }
  }
  return pts;
}

}  // namespace

PreprocessResult preprocess_boundary(const std::vector<BoundaryLoop>& loops,
                                     const PreprocessOptions& opt) {
  if (loops.empty()) throw std::invalid_argument(msg("no boundary loops"));

  PreprocessResult res;
  int max_input_degree = 1;

  struct RawChain {
    int loop;
    bool is_hole;
    std::vector<BezierCurve> segments;
    std::vector<SegmentOrigin> origins;
  };
  std::vector<RawChain> raw;

  for (std::size_t li = 0; li < loops.size(); ++li) {
    const BoundaryLoop& loop = loops[li];
    if (loop.pieces.empty()) throw std::invalid_argument(msg("empty loop"));

    RawChain rc;
    rc.loop = static_cast<int>(li);
    rc.is_hole = loop.is_hole;
    BBox box;
    for (std::size_t pi = 0; pi < loop.pieces.size(); ++pi) {
      max_input_degree = std::max(max_input_degree, loop.pieces[pi].degree);
      std::vector<BezierCurve> segs = bezier_extract(loop.pieces[pi]);
      for (std::size_t si = 0; si < segs.size(); ++si) {
        for (const Point2& q : segs[si].pts) box.expand(q);
        rc.segments.push_back(std::move(segs[si]));
        rc.origins.push_back({static_cast<int>(pi), static_cast<int>(si), 0});
      }
    }

    // Closure: consecutive pieces share endpoints, loop closes on itself.
    const double tol = 1e-9 * std::max(box.diag(), 1e-30);
    for (std::size_t s = 0; s < rc.segments.size(); ++s) {
      const Point2& e = rc.segments[s].pts.back();
      const Point2& b = rc.segments[(s + 1) % rc.segments.size()].pts.front();
      if (dist(e, b) > tol)
        throw std::invalid_argument(msg("loop " + std::to_string(li) +
                                        " is not closed at segment " + std::to_string(s)));
    }
    // Degenerate loop rejection via a dense sample polygon.
    const std::vector<Point2> sample = sample_loop(loop, 8);
    const double area = std::abs(polygon_signed_area(sample));
    if (area < 1e-12 * box.diag() * box.diag())
      throw std::invalid_argument(msg("loop " + std::to_string(li) + " has zero area"));

    raw.push_back(std::move(rc));
  }

  // L_ave over all extracted segments; frozen before any subdivision.
  double chord_sum = 0.0;
  std::size_t chord_count = 0;
  for (const RawChain& rc : raw) {
    for (const BezierCurve& s : rc.segments) {
      chord_sum += dist(s.pts.front(), s.pts.back());
      ++chord_count;
    }
  }
  const double l_ave = chord_sum / static_cast<double>(chord_count);
  res.stats.l_ave = l_ave;
  res.stats.l_ave_compute_count = 1;

  // Recursive midpoint subdivision against the frozen threshold.
  for (RawChain& rc : raw) {
    std::vector<BezierCurve> out;
    std::vector<SegmentOrigin> out_org;
    std::function<void(const BezierCurve&, SegmentOrigin)> split =
        [&](const BezierCurve& c, SegmentOrigin org) {
          if (chord_deviation(c) > l_ave && org.split_depth < opt.max_split_depth) {
            auto [l, r] = curve_split(c, 0.5);
            ++res.stats.total_splits;
            SegmentOrigin o2 = org;
            ++o2.split_depth;
            res.stats.max_split_depth = std::max(res.stats.max_split_depth, o2.split_depth);
            split(l, o2);
            split(r, o2);
          } else {
            out.push_back(c);
            out_org.push_back(org);
          }
        };
    for (std::size_t s = 0; s < rc.segments.size(); ++s) split(rc.segments[s], rc.origins[s]);
    rc.segments = std::move(out);
    rc.origins = std::move(out_org);
  }

  // Global degree policy.
  const int n = std::max(opt.min_degree, max_input_degree);
  res.degree = n;
  for (RawChain& rc : raw) {
    SegmentChain chain;
    chain.loop = rc.loop;
    chain.is_hole = rc.is_hole;
    chain.degree = n;
    for (std::size_t s = 0; s < rc.segments.size(); ++s) {
      chain.segments.push_back(curve_degree_elevate(rc.segments[s], n));
      chain.origins.push_back(rc.origins[s]);
    }
    res.chains.push_back(std::move(chain));
  }

  // Weld consecutive endpoints so that chains share control points exactly.
  for (SegmentChain& chain : res.chains) {
    const std::size_t m = chain.segments.size();
    for (std::size_t s = 0; s < m; ++s) {
      const std::size_t t = (s + 1) % m;
      const Point2 w = 0.5 * (chain.segments[s].pts.back() + chain.segments[t].pts.front());
      chain.segments[s].pts.back() = w;
      chain.segments[t].pts.front() = w;
    }
  }
  return res;
}

}  // namespace bezpar

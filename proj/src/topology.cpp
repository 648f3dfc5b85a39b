#include "bezpar/topology.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bezpar {

namespace {

constexpr double kPi = 3.14159265358979323846;

double norm_angle(double a) {
  while (a < 0.0) a += 2.0 * kPi;
  while (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

// Interior angle of a CCW polygon at index i, in (0, 2pi).
double interior_angle(const std::vector<Point2>& pos, const std::vector<int>& poly,
                      std::size_t i) {
  const std::size_t m = poly.size();
  const Point2& v = pos[poly[i]];
  const Point2& p = pos[poly[(i + m - 1) % m]];
  const Point2& n = pos[poly[(i + 1) % m]];
  const double a1 = std::atan2(n.y - v.y, n.x - v.x);
  const double a2 = std::atan2(p.y - v.y, p.x - v.x);
  return norm_angle(a2 - a1);
}

std::vector<Point2> polygon_points(const std::vector<Point2>& pos,
                                   const std::vector<int>& poly) {
  std::vector<Point2> out;
  out.reserve(poly.size());
  for (int v : poly) out.push_back(pos[v]);
  return out;
}

// Monotone-chain convex hull; tolerates duplicate points.
std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t m = pts.size();
  if (m < 3) return pts;
  std::vector<Point2> h(2 * m);
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    while (k >= 2 && orient2d(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = m - 1; i-- > 0;) {
    while (k >= lower && orient2d(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

double hull_diameter(const std::vector<Point2>& hull) {
  double d = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j)
      d = std::max(d, dist(hull[i], hull[j]));
  return d;
}

double dist_to_hull_boundary(const Point2& p, const std::vector<Point2>& hull) {
  if (hull.size() < 2) return dist(p, hull.empty() ? p : hull[0]);
  double d = std::numeric_limits<double>::max();
  for (std::size_t i = 0, j = hull.size() - 1; i < hull.size(); j = i++)
    d = std::min(d, dist_to_segment(p, hull[j], hull[i]));
  return d;
}

}  // namespace

std::map<std::pair<int, int>, std::vector<int>> QuadMesh::edge_quads() const {
  std::map<std::pair<int, int>, std::vector<int>> out;
  for (std::size_t q = 0; q < quads.size(); ++q) {
    for (int k = 0; k < 4; ++k) {
      const int a = quads[q][k];
      const int b = quads[q][(k + 1) % 4];
      out[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(q));
    }
  }
  return out;
}

std::vector<int> QuadMesh::vertex_valences() const {
  std::vector<int> val(positions.size(), 0);
  for (const auto& [e, qs] : edge_quads()) {
    (void)qs;
    ++val[e.first];
    ++val[e.second];
  }
  return val;
}

std::vector<std::vector<int>> QuadMesh::vertex_neighbors() const {
  std::vector<std::vector<int>> nb(positions.size());
  for (const auto& [e, qs] : edge_quads()) {
    (void)qs;
    nb[e.first].push_back(e.second);
    nb[e.second].push_back(e.first);
  }
  return nb;
}

// ---------------------------------------------------------------------------

DiscreteBoundary build_discrete_boundary(const std::vector<SegmentChain>& chains) {
  if (chains.empty()) throw std::invalid_argument("topology: no chains");
  DiscreteBoundary b;
  for (std::size_t ci = 0; ci < chains.size(); ++ci) {
    const SegmentChain& c = chains[ci];
    std::vector<int> loop;
    for (std::size_t s = 0; s < c.segments.size(); ++s)
      loop.push_back(b.add_vertex(c.segments[s].pts.front()));
    for (std::size_t s = 0; s < loop.size(); ++s) {
      const int a = loop[s];
      const int v = loop[(s + 1) % loop.size()];
      b.edge_source[{a, v}] = EdgeSource{static_cast<int>(ci), static_cast<int>(s)};
    }
    b.loops.push_back(std::move(loop));
  }

  // Simplicity: no proper crossing between any two non-adjacent edges.
  struct Edge {
    int a, v;
  };
  std::vector<Edge> edges;
  for (const auto& loop : b.loops)
    for (std::size_t s = 0; s < loop.size(); ++s)
      edges.push_back({loop[s], loop[(s + 1) % loop.size()]});
  for (std::size_t i = 0; i < edges.size(); ++i) {
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const Edge& e = edges[i];
      const Edge& f = edges[j];
      if (e.a == f.a || e.a == f.v || e.v == f.a || e.v == f.v) continue;
      if (segments_cross(b.positions[e.a], b.positions[e.v], b.positions[f.a],
                         b.positions[f.v])) {
        std::ostringstream os;
        os << "topology: boundary self-intersects between edges (" << e.a << "," << e.v
           << ") and (" << f.a << "," << f.v << ")";
        throw std::invalid_argument(os.str());
      }
    }
  }

  // Orientation and hole containment.
  const std::vector<Point2> outer = polygon_points(b.positions, b.loops[0]);
  if (polygon_signed_area(outer) <= 0.0)
    throw std::invalid_argument("topology: outer loop must be CCW");
  for (std::size_t li = 1; li < b.loops.size(); ++li) {
    const std::vector<Point2> hole = polygon_points(b.positions, b.loops[li]);
    if (polygon_signed_area(hole) >= 0.0)
      throw std::invalid_argument("topology: hole loop must be CW");
    for (const Point2& p : hole)
      if (!point_in_polygon(p, outer))
        throw std::invalid_argument("topology: hole vertex outside the outer loop");
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

struct BridgeCandidate {
  std::size_t hole;  // loop index
  std::size_t oi;    // index into outer loop
  std::size_t hj;    // index into hole loop
  double d;
};

bool bridge_segment_clear(const DiscreteBoundary& b, int v, int u) {
  const Point2& pv = b.positions[v];
  const Point2& pu = b.positions[u];
  const double tol = 1e-9 * std::max(1.0, dist(pv, pu));
  for (const auto& loop : b.loops) {
    for (std::size_t s = 0; s < loop.size(); ++s) {
      const int a = loop[s];
      const int c = loop[(s + 1) % loop.size()];
      if (a == v || a == u || c == v || c == u) continue;
      if (segments_cross(pv, pu, b.positions[a], b.positions[c])) return false;
    }
    for (int w : loop) {
      if (w == v || w == u) continue;
      const double t = dist_to_segment(b.positions[w], pv, pu);
      if (t < tol && dist(b.positions[w], pv) > tol && dist(b.positions[w], pu) > tol)
        return false;
    }
  }
  // Interior samples must stay inside the outer loop and outside every hole.
  const std::vector<Point2> outer = polygon_points(b.positions, b.loops[0]);
  for (double t : {0.25, 0.5, 0.75}) {
    const Point2 p = pv + t * (pu - pv);
    if (!point_in_polygon(p, outer)) return false;
    for (std::size_t li = 1; li < b.loops.size(); ++li)
      if (point_in_polygon(p, polygon_points(b.positions, b.loops[li]))) return false;
  }
  return true;
}

}  // namespace

DiscreteBoundary bridge_holes(const DiscreteBoundary& input) {
  DiscreteBoundary b = input;
  while (b.loops.size() > 1) {
    std::vector<int>& outer = b.loops[0];
    // Candidate pairs over all remaining holes, nearest first.
    std::vector<BridgeCandidate> cands;
    for (std::size_t li = 1; li < b.loops.size(); ++li)
      for (std::size_t i = 0; i < outer.size(); ++i)
        for (std::size_t j = 0; j < b.loops[li].size(); ++j)
          cands.push_back({li, i, j,
                           dist(b.positions[outer[i]], b.positions[b.loops[li][j]])});
    std::sort(cands.begin(), cands.end(), [](const BridgeCandidate& a,
                                             const BridgeCandidate& c) {
      if (a.d != c.d) return a.d < c.d;
      if (a.hole != c.hole) return a.hole < c.hole;
      if (a.oi != c.oi) return a.oi < c.oi;
      return a.hj < c.hj;
    });

    bool bridged = false;
    for (const BridgeCandidate& cand : cands) {
      const int v = outer[cand.oi];
      const int u = b.loops[cand.hole][cand.hj];
      if (cand.d <= 0.0) continue;
      if (!bridge_segment_clear(b, v, u)) continue;

      const std::vector<int> hole = b.loops[cand.hole];
      const std::size_t n1 = outer.size();
      const std::size_t n2 = hole.size();
      double per = 0.0;
      for (std::size_t p = 0; p + 1 < n1; ++p)
        per += dist(b.positions[outer[p]], b.positions[outer[p + 1]]);
      for (std::size_t q = 0; q + 1 < n2; ++q)
        per += dist(b.positions[hole[q]], b.positions[hole[q + 1]]);
      const int nu = static_cast<int>(
          std::ceil(static_cast<double>(n1 + n2) * cand.d / per));

      const Point2 pv = b.positions[v];
      const Point2 pu = b.positions[u];
      std::vector<int> z(nu), zc(nu);
      for (int k = 0; k < nu; ++k) {
        const Point2 p = pv + (static_cast<double>(k + 1) / (nu + 1)) * (pu - pv);
        z[k] = b.add_vertex(p);
      }
      for (int k = 0; k < nu; ++k) zc[k] = b.add_vertex(b.positions[z[k]]);
      const int uc = b.add_vertex(pu);
      const int vc = b.add_vertex(pv);

      std::vector<int> merged;
      merged.insert(merged.end(), outer.begin(), outer.begin() + cand.oi + 1);
      for (int k = 0; k < nu; ++k) merged.push_back(z[k]);
      for (std::size_t q = 0; q < n2; ++q) merged.push_back(hole[(cand.hj + q) % n2]);
      merged.push_back(uc);
      for (int k = nu - 1; k >= 0; --k) merged.push_back(zc[k]);
      merged.push_back(vc);
      merged.insert(merged.end(), outer.begin() + cand.oi + 1, outer.end());

      // Re-key the hole edge that now ends at the copy of u, and the outer
      // edge that now starts at the copy of v.
      const int u_prev = hole[(cand.hj + n2 - 1) % n2];
      auto it = b.edge_source.find({u_prev, u});
      if (it != b.edge_source.end()) {
        b.edge_source[{u_prev, uc}] = it->second;
        b.edge_source.erase(it);
      }
      const int v_next = outer[(cand.oi + 1) % n1];
      it = b.edge_source.find({v, v_next});
      if (it != b.edge_source.end()) {
        b.edge_source[{vc, v_next}] = it->second;
        b.edge_source.erase(it);
      }
      // Bridge edges.
      auto mark_bridge = [&](int a, int c) { b.edge_source[{a, c}] = EdgeSource{}; };
      mark_bridge(v, nu > 0 ? z[0] : u);
      for (int k = 0; k + 1 < nu; ++k) mark_bridge(z[k], z[k + 1]);
      if (nu > 0) mark_bridge(z[nu - 1], u);
      mark_bridge(uc, nu > 0 ? zc[nu - 1] : vc);
      for (int k = nu - 1; k > 0; --k) mark_bridge(zc[k], zc[k - 1]);
      if (nu > 0) mark_bridge(zc[0], vc);

      b.loops[0] = std::move(merged);
      b.loops.erase(b.loops.begin() + cand.hole);
      bridged = true;
      break;
    }
    if (!bridged)
      throw std::runtime_error("topology: no valid bridge found for remaining holes");
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

// Diagonal test for (poly[wi], poly[ui]) inside the polygon; tolerates slit
// twins through proper-crossing tests plus vertex-proximity rejection.
bool diagonal_clear(const std::vector<Point2>& pos, const std::vector<int>& poly,
                    std::size_t wi, std::size_t ui) {
  const std::size_t m = poly.size();
  if (wi == ui) return false;
  if ((wi + 1) % m == ui || (ui + 1) % m == wi) return false;
  const Point2& a = pos[poly[wi]];
  const Point2& c = pos[poly[ui]];
  const double len = dist(a, c);
  BBox box;
  for (int v : poly) box.expand(pos[v]);
  const double tol = 1e-9 * std::max(box.diag(), 1e-30);
  if (len < tol) return false;
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t t = (s + 1) % m;
    if (s == wi || s == ui || t == wi || t == ui) continue;
    if (segments_cross(a, c, pos[poly[s]], pos[poly[t]])) return false;
  }
  for (std::size_t s = 0; s < m; ++s) {
    if (s == wi || s == ui) continue;
    const Point2& p = pos[poly[s]];
    if (dist_to_segment(p, a, c) < tol && dist(p, a) > tol && dist(p, c) > tol)
      return false;
  }
  const std::vector<Point2> pts = polygon_points(pos, poly);
  for (double t : {0.25, 0.5, 0.75})
    if (!point_in_polygon(a + t * (c - a), pts)) return false;
  return true;
}

struct DecomposeContext {
  const std::vector<Point2>* pos;
  double epsilon;
  std::vector<QuasiConvexPiece> out;
  int guard = 0;
};

std::vector<double> piece_concavity(const std::vector<Point2>& pos,
                                    const std::vector<int>& poly) {
  const std::vector<Point2> pts = polygon_points(pos, poly);
  const std::vector<Point2> hull = convex_hull(pts);
  const double diag = std::max(hull_diameter(hull), 1e-300);
  std::vector<double> conc(poly.size(), 0.0);
  for (std::size_t i = 0; i < poly.size(); ++i)
    conc[i] = dist_to_hull_boundary(pts[i], hull) / diag;
  return conc;
}

std::vector<std::size_t> natural_corners(const std::vector<Point2>& pos,
                                         const std::vector<int>& poly) {
  std::vector<std::size_t> corners;
  for (std::size_t i = 0; i < poly.size(); ++i)
    if (interior_angle(pos, poly, i) <= 0.75 * kPi) corners.push_back(i);
  return corners;
}

// Pick the cut target from w: the straightest interior cut (closest to the
// interior-angle bisector), tie-broken by length.
bool best_cut_from(const std::vector<Point2>& pos, const std::vector<int>& poly,
                   std::size_t wi, std::size_t& out_ui) {
  const std::size_t m = poly.size();
  const Point2& w = pos[poly[wi]];
  const Point2& nxt = pos[poly[(wi + 1) % m]];
  const double theta = interior_angle(pos, poly, wi);
  const double base = std::atan2(nxt.y - w.y, nxt.x - w.x);
  const double bisector = base + 0.5 * theta;

  double best_score = std::numeric_limits<double>::max();
  double best_len = 0.0;
  bool found = false;
  for (std::size_t u = 0; u < m; ++u) {
    if (!diagonal_clear(pos, poly, wi, u)) continue;
    const Point2 d = pos[poly[u]] - w;
    const double ang = std::atan2(d.y, d.x);
    double dev = std::abs(norm_angle(ang - bisector));
    dev = std::min(dev, 2.0 * kPi - dev);
    const double len = norm(d);
    if (dev < best_score - 1e-12 ||
        (std::abs(dev - best_score) <= 1e-12 && len < best_len)) {
      best_score = dev;
      best_len = len;
      out_ui = u;
      found = true;
    }
  }
  return found;
}

void decompose_recursive(DecomposeContext& ctx, std::vector<int> poly) {
  const std::vector<Point2>& pos = *ctx.pos;
  if (++ctx.guard > 10000)
    throw std::runtime_error("topology: convex decomposition did not terminate");
  if (poly.size() < 4) {
    ctx.out.push_back({poly, piece_concavity(pos, poly)});
    return;
  }

  const std::vector<double> conc = piece_concavity(pos, poly);
  std::size_t worst = 0;
  for (std::size_t i = 1; i < poly.size(); ++i)
    if (conc[i] > conc[worst]) worst = i;

  if (conc[worst] <= ctx.epsilon) {
    ctx.out.push_back({poly, conc});
    return;
  }
  std::size_t cut_from = worst;

  std::size_t target = 0;
  if (!best_cut_from(pos, poly, cut_from, target)) {
    // No visible partner; fall back to the next-worst vertex that has one.
    std::vector<std::size_t> order(poly.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return conc[a] > conc[b]; });
    bool ok = false;
    for (std::size_t cand : order) {
      if (conc[cand] <= ctx.epsilon) break;
      if (best_cut_from(pos, poly, cand, target)) {
        cut_from = cand;
        ok = true;
        break;
      }
    }
    if (!ok) {
      ctx.out.push_back({poly, conc});
      return;
    }
  }

  std::vector<int> left, right;
  for (std::size_t i = cut_from;; i = (i + 1) % poly.size()) {
    left.push_back(poly[i]);
    if (i == target) break;
  }
  for (std::size_t i = target;; i = (i + 1) % poly.size()) {
    right.push_back(poly[i]);
    if (i == cut_from) break;
  }
  decompose_recursive(ctx, std::move(left));
  decompose_recursive(ctx, std::move(right));
}

}  // namespace

std::vector<QuasiConvexPiece> approx_convex_decompose(const DiscreteBoundary& b,
                                                      double epsilon) {
  if (b.loops.size() != 1)
    throw std::invalid_argument("topology: decompose expects a simply-connected boundary");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("topology: epsilon must lie in (0,1]");
  DecomposeContext ctx;
  ctx.pos = &b.positions;
  ctx.epsilon = epsilon;
  decompose_recursive(ctx, b.loops[0]);
  return ctx.out;
}

// ---------------------------------------------------------------------------

namespace detail {

namespace {

bool point_in_triangle(const Point2& p, const Point2& a, const Point2& b,
                       const Point2& c) {
  const double d1 = orient2d(a, b, p);
  const double d2 = orient2d(b, c, p);
  const double d3 = orient2d(c, a, p);
  const bool has_neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
  const bool has_pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
  return !(has_neg && has_pos);
}

}  // namespace

void mesh_piece_fallback(const std::vector<int>& polygon, PieceMeshView view,
                         std::map<std::pair<int, int>, int>& edge_midpoints) {
  std::vector<Point2>& pos = *view.positions;
  auto midpoint = [&](int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    auto it = edge_midpoints.find(key);
    if (it != edge_midpoints.end()) return it->second;
    pos.push_back(0.5 * (pos[a] + pos[b]));
    const int id = static_cast<int>(pos.size()) - 1;
    edge_midpoints[key] = id;
    return id;
  };

  // Ear clipping.
  std::vector<int> poly = polygon;
  std::vector<std::array<int, 3>> tris;
  int guard = 0;
  while (poly.size() > 3) {
    if (++guard > 4 * static_cast<int>(polygon.size()) + 16)
      throw std::runtime_error("topology: ear clipping failed");
    bool clipped = false;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const std::size_t m = poly.size();
      const int pa = poly[(i + m - 1) % m];
      const int pb = poly[i];
      const int pc = poly[(i + 1) % m];
      if (orient2d(pos[pa], pos[pb], pos[pc]) <= 0.0) continue;
      bool blocked = false;
      for (std::size_t j = 0; j < m; ++j) {
        const int q = poly[j];
        if (q == pa || q == pb || q == pc) continue;
        if (point_in_triangle(pos[q], pos[pa], pos[pb], pos[pc])) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      tris.push_back({pa, pb, pc});
      poly.erase(poly.begin() + i);
      clipped = true;
      break;
    }
    if (!clipped) {
      // Degenerate configuration: clip the least-reflex vertex regardless.
      std::size_t best = 0;
      double best_area = -std::numeric_limits<double>::max();
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const std::size_t m = poly.size();
        const double a = orient2d(pos[poly[(i + m - 1) % m]], pos[poly[i]],
                                  pos[poly[(i + 1) % m]]);
        if (a > best_area) {
          best_area = a;
          best = i;
        }
      }
      const std::size_t m = poly.size();
      tris.push_back({poly[(best + m - 1) % m], poly[best], poly[(best + 1) % m]});
      poly.erase(poly.begin() + best);
    }
  }
  tris.push_back({poly[0], poly[1], poly[2]});

  for (const auto& t : tris) {
    const int m01 = midpoint(t[0], t[1]);
    const int m12 = midpoint(t[1], t[2]);
    const int m20 = midpoint(t[2], t[0]);
    pos.push_back((pos[t[0]] + pos[t[1]] + pos[t[2]]) / 3.0);
    const int c = static_cast<int>(pos.size()) - 1;
    view.quads->push_back({t[0], m01, c, m20});
    view.quads->push_back({t[1], m12, c, m01});
    view.quads->push_back({t[2], m20, c, m12});
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------

namespace {

struct PiecePlan {
  int k = 0;  // 3, 4 or 5; 0 = fallback
  std::vector<std::size_t> corners;
  std::vector<int> mid_counts;  // k entries for k in {3,5}; {a,b} for k == 4
};

bool solve_mid_counts(int k, const std::vector<int>& s, std::vector<int>& m) {
  if (k == 4) {
    if (s[0] != s[2] || s[1] != s[3]) return false;
    m = {s[0], s[1]};
    return s[0] >= 1 && s[1] >= 1;
  }
  if (k == 3) {
    const int twice[3] = {s[1] + s[2] - s[0], s[0] + s[2] - s[1], s[0] + s[1] - s[2]};
    m.assign(3, 0);
    for (int i = 0; i < 3; ++i) {
      if (twice[i] <= 0 || twice[i] % 2 != 0) return false;
      m[i] = twice[i] / 2;
    }
    return true;
  }
  if (k == 5) {
    const int twice0 = s[0] + s[1] - s[2] - s[3] + s[4];
    if (twice0 <= 0 || twice0 % 2 != 0) return false;
    m.assign(5, 0);
    m[0] = twice0 / 2;
    m[2] = s[1] - m[0];
    m[4] = s[3] - m[2];
    m[1] = s[0] - m[4];
    m[3] = s[2] - m[1];
    for (int v : m)
      if (v < 1) return false;
    return true;
  }
  return false;
}

std::vector<int> corner_arcs(const std::vector<std::size_t>& corners, std::size_t m) {
  std::vector<int> s;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const std::size_t a = corners[i];
    const std::size_t b = corners[(i + 1) % corners.size()];
    s.push_back(static_cast<int>((b + m - a) % m));
  }
  return s;
}

bool try_corner_set(const std::vector<std::size_t>& corners, std::size_t m,
                    PiecePlan& plan) {
  for (int arc : corner_arcs(corners, m))
    if (arc < 1) return false;
  const std::vector<int> s = corner_arcs(corners, m);
  std::vector<int> mid;
  if (!solve_mid_counts(static_cast<int>(corners.size()), s, mid)) return false;
  plan.k = static_cast<int>(corners.size());
  plan.corners = corners;
  plan.mid_counts = mid;
  return true;
}

// Polygon area centroid; falls back to the vertex mean for degenerate input.
Point2 polygon_centroid(const std::vector<Point2>& pts) {
  double a = 0.0;
  Point2 c{0.0, 0.0};
  const std::size_t m = pts.size();
  for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
    const double w = cross(pts[j], pts[i]);
    a += w;
    c += w * (pts[j] + pts[i]);
  }
  if (std::abs(a) < 1e-300) {
    Point2 mean{0.0, 0.0};
    for (const Point2& p : pts) mean += p;
    return mean / static_cast<double>(m);
  }
  return c / (3.0 * a);
}

// Quality of one corner choice: corner angles close to a right angle are
// good, nearly flat corners would degenerate the patch Jacobian there.
double corner_set_score(const std::vector<Point2>& pos, const std::vector<int>& poly,
                        const std::vector<std::size_t>& corners) {
  double score = 0.0;
  const double m4 = static_cast<double>(poly.size()) / corners.size();
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const double theta = interior_angle(pos, poly, corners[i]);
    score += std::abs(theta - 0.5 * kPi);
    if (theta > 2.8) score += 10.0;
    const std::size_t next = corners[(i + 1) % corners.size()];
    const double arc = static_cast<double>((next + poly.size() - corners[i]) % poly.size());
    score += 0.02 * std::abs(arc - m4);
  }
  return score;
}

PiecePlan plan_piece(const std::vector<Point2>& pos, const std::vector<int>& poly) {
  const std::size_t m = poly.size();
  PiecePlan plan;

  std::vector<std::size_t> corners = natural_corners(pos, poly);
  if (corners.size() >= 3 && corners.size() <= 5) {
    if (try_corner_set(corners, m, plan)) {
      if (plan.k == 4) return plan;
      // Center schemes need the centroid strictly inside.
      if (point_in_polygon(polygon_centroid(polygon_points(pos, poly)),
                           polygon_points(pos, poly)))
        return plan;
      plan = PiecePlan{};
    }
    // Perturb each corner by one position in either direction.
    const std::size_t k = corners.size();
    std::vector<int> shift(k, -1);
    while (true) {
      std::vector<std::size_t> cand(k);
      bool ok = true;
      for (std::size_t i = 0; i < k; ++i)
        cand[i] = (corners[i] + m + static_cast<std::size_t>(shift[i] + 1) - 1) % m;
      std::vector<std::size_t> sorted = cand;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) ok = false;
      if (ok) {
        // Keep cyclic order consistent with the first corner.
        std::rotate(cand.begin(), std::min_element(cand.begin(), cand.end()),
                    cand.end());
        if (std::is_sorted(cand.begin(), cand.end()) && try_corner_set(cand, m, plan)) {
          if (plan.k == 4) return plan;
          if (point_in_polygon(polygon_centroid(polygon_points(pos, poly)),
                               polygon_points(pos, poly)))
            return plan;
          plan = PiecePlan{};
        }
      }
      std::size_t d = 0;
      while (d < k && shift[d] == 1) shift[d++] = -1;
      if (d == k) break;
      ++shift[d];
    }
  }

  // Scored 4-corner layout over all antipodal placements; feasible for any
  // even m >= 4.
  if (m >= 4 && m % 2 == 0) {
    const std::size_t half = m / 2;
    double best = std::numeric_limits<double>::max();
    std::vector<std::size_t> best_set;
    for (std::size_t c0 = 0; c0 < m; ++c0) {
      for (std::size_t off = 1; off < half; ++off) {
        std::vector<std::size_t> cset = {c0, (c0 + off) % m, (c0 + half) % m,
                                         (c0 + off + half) % m};
        std::rotate(cset.begin(), std::min_element(cset.begin(), cset.end()),
                    cset.end());
        if (!std::is_sorted(cset.begin(), cset.end())) continue;
        const double score = corner_set_score(pos, poly, cset);
        if (score < best - 1e-12) {
          best = score;
          best_set = cset;
        }
      }
    }
    if (!best_set.empty() && try_corner_set(best_set, m, plan)) return plan;
  }
  return PiecePlan{};  // fallback
}

struct MeshBuilder {
  std::vector<Point2> pos;
  std::vector<std::array<int, 4>> quads;

  int add(const Point2& p) {
    pos.push_back(p);
    return static_cast<int>(pos.size()) - 1;
  }

  // Discrete Coons grid over four vertex chains; interior vertices created.
  // bottom: (A+1) ids, right: (B+1), top: (A+1) from T[0][B] to T[A][B],
  // left: (B+1) from T[0][0] to T[0][B].
  void emit_grid(const std::vector<int>& bottom, const std::vector<int>& right,
                 const std::vector<int>& top, const std::vector<int>& left) {
    const std::size_t A = bottom.size() - 1;
    const std::size_t B = right.size() - 1;
    std::vector<int> grid((A + 1) * (B + 1), -1);
    auto at = [&](std::size_t r, std::size_t s) -> int& { return grid[r * (B + 1) + s]; };
    for (std::size_t r = 0; r <= A; ++r) {
      at(r, 0) = bottom[r];
      at(r, B) = top[r];
    }
    for (std::size_t s = 0; s <= B; ++s) {
      at(A, s) = right[s];
      at(0, s) = left[s];
    }
    for (std::size_t r = 1; r < A; ++r) {
      for (std::size_t s = 1; s < B; ++s) {
        const double xi = static_cast<double>(r) / A;
        const double eta = static_cast<double>(s) / B;
        const Point2 p = (1.0 - xi) * pos[left[s]] + xi * pos[right[s]] +
                         (1.0 - eta) * pos[bottom[r]] + eta * pos[top[r]] -
                         ((1.0 - xi) * (1.0 - eta) * pos[bottom[0]] +
                          xi * (1.0 - eta) * pos[bottom[A]] + xi * eta * pos[right[B]] +
                          (1.0 - xi) * eta * pos[left[B]]);
        at(r, s) = add(p);
      }
    }
    for (std::size_t r = 0; r < A; ++r)
      for (std::size_t s = 0; s < B; ++s)
        quads.push_back({at(r, s), at(r + 1, s), at(r + 1, s + 1), at(r, s + 1)});
  }
};

std::vector<int> chain_slice(const std::vector<int>& poly, std::size_t from, int count) {
  std::vector<int> out;
  const std::size_t m = poly.size();
  for (int i = 0; i <= count; ++i) out.push_back(poly[(from + i) % m]);
  return out;
}

void mesh_piece_template(const PiecePlan& plan, const std::vector<int>& poly,
                         MeshBuilder& mb) {
  const std::size_t m = poly.size();
  const std::vector<int> s = [&] {
    std::vector<int> arcs;
    for (std::size_t i = 0; i < plan.corners.size(); ++i) {
      const std::size_t a = plan.corners[i];
      const std::size_t b = plan.corners[(i + 1) % plan.corners.size()];
      arcs.push_back(static_cast<int>((b + m - a) % m));
    }
    return arcs;
  }();

  if (plan.k == 4) {
    const int a = s[0];
    const int b = s[1];
    const std::vector<int> side0 = chain_slice(poly, plan.corners[0], a);
    const std::vector<int> side1 = chain_slice(poly, plan.corners[1], b);
    const std::vector<int> side2 = chain_slice(poly, plan.corners[2], a);
    const std::vector<int> side3 = chain_slice(poly, plan.corners[3], b);
    std::vector<int> top(a + 1), left(b + 1);
    for (int r = 0; r <= a; ++r) top[r] = side2[a - r];
    for (int t = 0; t <= b; ++t) left[t] = side3[b - t];
    mb.emit_grid(side0, side1, top, left);
    return;
  }

  // Center scheme for k in {3,5}: one midline per side meeting at the centroid.
  const int k = plan.k;
  const std::vector<int>& mc = plan.mid_counts;
  const Point2 center = polygon_centroid(polygon_points(mb.pos, poly));
  const int center_id = mb.add(center);

  std::vector<std::vector<int>> side(k);
  for (int i = 0; i < k; ++i) side[i] = chain_slice(poly, plan.corners[i], s[i]);

  // Midline i starts at the split vertex of side i (mc[(i-1+k)%k] edges from
  // corner i) and runs mc[i] edges to the center.
  std::vector<std::vector<int>> mid(k);
  for (int i = 0; i < k; ++i) {
    const int p_i = mc[(i - 1 + k) % k];
    const int m_vid = side[i][p_i];
    std::vector<int> chain = {m_vid};
    for (int r = 1; r < mc[i]; ++r) {
      const double t = static_cast<double>(r) / mc[i];
      chain.push_back(mb.add(mb.pos[m_vid] + t * (center - mb.pos[m_vid])));
    }
    chain.push_back(center_id);
    mid[i] = std::move(chain);
  }

  for (int i = 0; i < k; ++i) {
    const int prev = (i - 1 + k) % k;
    const int A = mc[i];          // edges on the tail of side prev
    const int B = mc[prev];       // edges on the head of side i
    const int split_prev = mc[(prev - 1 + k) % k];
    std::vector<int> bottom(side[prev].begin() + split_prev, side[prev].end());
    std::vector<int> right(side[i].begin(), side[i].begin() + B + 1);
    std::vector<int> top(A + 1), left(B + 1);
    for (int r = 0; r <= A; ++r) top[r] = mid[i][A - r];
    for (int t = 0; t <= B; ++t) left[t] = mid[prev][t];
    (void)bottom.size();
    mb.emit_grid(bottom, right, top, left);
  }
}

}  // namespace

QuadMesh quadrangulate(std::vector<QuasiConvexPiece> pieces, DiscreteBoundary& b,
                       std::vector<SegmentChain>& chains, TopologyFlags& flags) {
  if (b.loops.size() != 1)
    throw std::invalid_argument("topology: quadrangulate expects a bridged boundary");
  MeshBuilder mb;
  mb.pos = b.positions;

  auto split_boundary_edge = [&](int va, int vb) -> int {
    const auto key = std::make_pair(va, vb);
    auto it = b.edge_source.find(key);
    if (it == b.edge_source.end())
      throw std::logic_error("topology: edge is not a boundary edge");
    const EdgeSource src = it->second;
    int mid_id;
    if (src.is_bridge()) {
      mid_id = b.add_vertex(0.5 * (b.positions[va] + b.positions[vb]));
      mb.pos.push_back(b.positions.back());
      b.edge_source.erase(key);
      b.edge_source[{va, mid_id}] = EdgeSource{};
      b.edge_source[{mid_id, vb}] = EdgeSource{};
    } else {
      SegmentChain& chain = chains[src.chain];
      auto [l, r] = curve_split(chain.segments[src.segment], 0.5);
      const Point2 midpoint = l.pts.back();
      chain.segments[src.segment] = l;
      chain.segments.insert(chain.segments.begin() + src.segment + 1, r);
      SegmentOrigin org = chain.origins[src.segment];
      ++org.split_depth;
      chain.origins[src.segment] = org;
      chain.origins.insert(chain.origins.begin() + src.segment + 1, org);
      for (auto& [e, es] : b.edge_source)
        if (es.chain == src.chain && es.segment > src.segment) ++es.segment;
      mid_id = b.add_vertex(midpoint);
      mb.pos.push_back(midpoint);
      b.edge_source.erase(key);
      b.edge_source[{va, mid_id}] = EdgeSource{src.chain, src.segment};
      b.edge_source[{mid_id, vb}] = EdgeSource{src.chain, src.segment + 1};
    }
    // Insert into the boundary loop.
    std::vector<int>& loop = b.loops[0];
    for (std::size_t i = 0; i < loop.size(); ++i) {
      if (loop[i] == va && loop[(i + 1) % loop.size()] == vb) {
        loop.insert(loop.begin() + i + 1, mid_id);
        break;
      }
    }
    return mid_id;
  };

  auto insert_into_piece = [&](QuasiConvexPiece& piece, int va, int vb, int mid_id) {
    for (std::size_t i = 0; i < piece.polygon.size(); ++i) {
      const int a = piece.polygon[i];
      const int c = piece.polygon[(i + 1) % piece.polygon.size()];
      if ((a == va && c == vb) || (a == vb && c == va)) {
        piece.polygon.insert(piece.polygon.begin() + i + 1, mid_id);
        return true;
      }
    }
    return false;
  };

  // Parity repair: templates need an even edge count per piece. Odd pieces
  // are fixed bottom-up along a spanning forest of the cut-edge adjacency so
  // that free interior subdivisions absorb the parity; a root without such an
  // option splits its longest boundary Bezier segment instead.
  auto split_cut_edge = [&](int va, int vb) {
    mb.pos.push_back(0.5 * (mb.pos[va] + mb.pos[vb]));
    const int mid = static_cast<int>(mb.pos.size()) - 1;
    for (QuasiConvexPiece& other : pieces) insert_into_piece(other, va, vb, mid);
    ++flags.parity_cut_splits;
  };
  auto split_longest_boundary = [&](QuasiConvexPiece& piece) {
    double best_len = -1.0;
    int bva = -1, bvb = -1;
    for (std::size_t i = 0; i < piece.polygon.size(); ++i) {
      const int a = piece.polygon[i];
      const int c = piece.polygon[(i + 1) % piece.polygon.size()];
      if (!b.edge_source.count({a, c})) continue;
      const double len = dist(mb.pos[a], mb.pos[c]);
      if (len > best_len) {
        best_len = len;
        bva = a;
        bvb = c;
      }
    }
    if (bva < 0) return false;
    const int mid = split_boundary_edge(bva, bvb);
    insert_into_piece(piece, bva, bvb, mid);
    ++flags.parity_segment_splits;
    return true;
  };
  {
    const std::size_t np = pieces.size();
    auto is_cut = [&](int a, int c) {
      return !b.edge_source.count({a, c}) && !b.edge_source.count({c, a});
    };
    std::vector<std::set<std::size_t>> nbr(np);
    {
      std::map<std::pair<int, int>, std::vector<std::size_t>> cut_pieces;
      for (std::size_t pi = 0; pi < np; ++pi) {
        const auto& poly = pieces[pi].polygon;
        for (std::size_t i = 0; i < poly.size(); ++i) {
          const int a = poly[i];
          const int c = poly[(i + 1) % poly.size()];
          if (is_cut(a, c))
            cut_pieces[{std::min(a, c), std::max(a, c)}].push_back(pi);
        }
      }
      for (const auto& [e, ps] : cut_pieces) {
        (void)e;
        if (ps.size() == 2 && ps[0] != ps[1]) {
          nbr[ps[0]].insert(ps[1]);
          nbr[ps[1]].insert(ps[0]);
        }
      }
    }
    std::vector<int> parent(np, -2);
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < np; ++s) {
      if (parent[s] != -2) continue;
      parent[s] = -1;
      std::vector<std::size_t> queue = {s};
      for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const std::size_t cur = queue[qi];
        order.push_back(cur);
        for (std::size_t nx : nbr[cur]) {
          if (parent[nx] != -2) continue;
          parent[nx] = static_cast<int>(cur);
          queue.push_back(nx);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t pi = *it;
      QuasiConvexPiece& piece = pieces[pi];
      if (piece.polygon.size() % 2 == 0) continue;
      bool fixed = false;
      if (parent[pi] >= 0) {
        // Longest cut edge shared with the parent piece.
        const auto& ppoly = pieces[parent[pi]].polygon;
        std::set<std::pair<int, int>> pedges;
        for (std::size_t i = 0; i < ppoly.size(); ++i) {
          const int a = ppoly[i];
          const int c = ppoly[(i + 1) % ppoly.size()];
          pedges.insert({std::min(a, c), std::max(a, c)});
        }
        double best_len = -1.0;
        int cva = -1, cvb = -1;
        for (std::size_t i = 0; i < piece.polygon.size(); ++i) {
          const int a = piece.polygon[i];
          const int c = piece.polygon[(i + 1) % piece.polygon.size()];
          if (!is_cut(a, c) || !pedges.count({std::min(a, c), std::max(a, c)}))
            continue;
          const double len = dist(mb.pos[a], mb.pos[c]);
          if (len > best_len) {
            best_len = len;
            cva = a;
            cvb = c;
          }
        }
        if (cva >= 0) {
          split_cut_edge(cva, cvb);
          fixed = true;
        }
      }
      if (!fixed) fixed = split_longest_boundary(piece);
      if (!fixed) {
        // Isolated piece without boundary edges; borrow any cut edge.
        for (std::size_t i = 0; i < piece.polygon.size() && !fixed; ++i) {
          const int a = piece.polygon[i];
          const int c = piece.polygon[(i + 1) % piece.polygon.size()];
          if (is_cut(a, c)) {
            split_cut_edge(a, c);
            fixed = true;
          }
        }
      }
    }
  }
  // Leftover odd pieces (flips cascading upward past a root) get boundary
  // splits directly.
  for (QuasiConvexPiece& piece : pieces)
    if (piece.polygon.size() % 2 != 0) split_longest_boundary(piece);
  for (const QuasiConvexPiece& piece : pieces)
    if (piece.polygon.size() % 2 != 0)
      throw std::runtime_error("topology: parity repair failed");

  // Plan all pieces; any failure switches the whole domain to the fallback
  // mesher so that shared cut edges stay conforming.
  std::vector<PiecePlan> plans(pieces.size());
  bool all_ok = true;
  for (std::size_t pi = 0; pi < pieces.size(); ++pi) {
    plans[pi] = plan_piece(mb.pos, pieces[pi].polygon);
    if (plans[pi].k == 0) all_ok = false;
  }

  if (all_ok) {
    for (std::size_t pi = 0; pi < pieces.size(); ++pi)
      mesh_piece_template(plans[pi], pieces[pi].polygon, mb);
  } else {
    flags.fallback_quadrangulation = true;
    std::map<std::pair<int, int>, int> edge_midpoints;
    // Boundary-edge midpoints come from true segment splits.
    for (QuasiConvexPiece& piece : pieces) {
      const std::vector<int> poly = piece.polygon;
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const int a = poly[i];
        const int c = poly[(i + 1) % poly.size()];
        if (b.edge_source.count({a, c}) &&
            !edge_midpoints.count({std::min(a, c), std::max(a, c)})) {
          const int mid = split_boundary_edge(a, c);
          edge_midpoints[{std::min(a, c), std::max(a, c)}] = mid;
        }
      }
    }
    for (QuasiConvexPiece& piece : pieces) {
      detail::PieceMeshView view{&mb.pos, &mb.quads};
      detail::mesh_piece_fallback(piece.polygon, view, edge_midpoints);
    }
  }

  QuadMesh mesh;
  mesh.positions = std::move(mb.pos);
  mesh.quads = std::move(mb.quads);
  mesh.boundary_vertex.assign(mesh.positions.size(), 0);
  const std::vector<int>& loop = b.loops[0];
  for (std::size_t i = 0; i < loop.size(); ++i) {
    mesh.boundary_vertex[loop[i]] = 1;
    const int a = loop[i];
    const int c = loop[(i + 1) % loop.size()];
    auto it = b.edge_source.find({a, c});
    if (it == b.edge_source.end())
      throw std::logic_error("topology: boundary loop edge without source");
    mesh.boundary_edges[{std::min(a, c), std::max(a, c)}] = it->second;
  }
  b.positions = mesh.positions;
  return mesh;
}

// ---------------------------------------------------------------------------

SmoothResult laplacian_smooth(const QuadMesh& m, double delta, int max_iterations) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("topology: smoothing tolerance must lie in (0,1)");
  SmoothResult res;
  res.mesh = m;
  const std::vector<std::vector<int>> nb = m.vertex_neighbors();
  std::vector<Point2>& pos = res.mesh.positions;

  for (int it = 1; it <= max_iterations; ++it) {
    std::vector<Point2> next = pos;
    for (std::size_t v = 0; v < pos.size(); ++v) {
      if (m.boundary_vertex[v] || nb[v].empty()) continue;
      Point2 acc{0.0, 0.0};
      for (int u : nb[v]) acc += pos[u];
      next[v] = acc / static_cast<double>(nb[v].size());
    }
    double num = 0.0, den = 0.0;
    for (std::size_t v = 0; v < pos.size(); ++v) {
      num += norm2(next[v] - pos[v]);
      den += norm2(pos[v]);
    }
    const double ratio = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    pos = std::move(next);
    res.iterations = it;
    res.final_ratio = ratio;
    if (ratio < delta) {
      res.converged = true;
      break;
    }
  }
  return res;
}

TopologyResult build_topology(std::vector<SegmentChain> chains, double epsilon,
                              double delta, int smooth_cap) {
  TopologyResult out;
  DiscreteBoundary base = build_discrete_boundary(chains);
  out.boundary = bridge_holes(base);
  std::vector<QuasiConvexPiece> pieces = approx_convex_decompose(out.boundary, epsilon);
  out.chains = std::move(chains);
  QuadMesh raw = quadrangulate(std::move(pieces), out.boundary, out.chains, out.flags);
  SmoothResult sm = laplacian_smooth(raw, delta, smooth_cap);
  out.mesh = std::move(sm.mesh);
  return out;
}

std::string quadmesh_to_obj(const QuadMesh& m) {
  std::ostringstream os;
  os.precision(17);
  for (const Point2& p : m.positions) os << "v " << p.x << " " << p.y << " 0\n";
  for (const auto& q : m.quads)
    os << "f " << q[0] + 1 << " " << q[1] + 1 << " " << q[2] + 1 << " " << q[3] + 1
       << "\n";
  return os.str();
}

}  // namespace bezpar

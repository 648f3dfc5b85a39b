#include "bezpar/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "bezpar/lbfgs.hpp"

namespace bezpar {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Integral tables for a fixed degree n.
struct DegreeTables {
  int n = 0;
  std::vector<std::vector<double>> i1;  // \int B_k^n B_j^{n-1}
  std::vector<std::vector<double>> g1;  // \int B_i^{n-1} B_j^{n-1}
  std::vector<std::vector<double>> g2;  // \int B_i^{n-2} B_j^{n-2}

  explicit DegreeTables(int degree) : n(degree) {
    i1.assign(n + 1, std::vector<double>(n, 0.0));
    for (int k = 0; k <= n; ++k)
      for (int j = 0; j < n; ++j)
        i1[k][j] = binomial(n, k) * binomial(n - 1, j) / binomial(2 * n - 1, k + j) /
                   (2.0 * n);
    g1.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        g1[i][j] = binomial(n - 1, i) * binomial(n - 1, j) /
                   binomial(2 * n - 2, i + j) / (2.0 * n - 1.0);
    if (n >= 2) {
      g2.assign(n - 1, std::vector<double>(n - 1, 0.0));
      for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j + 1 < n; ++j)
          g2[i][j] = binomial(n - 2, i) * binomial(n - 2, j) /
                     binomial(2 * n - 4, i + j) / (2.0 * n - 3.0);
    }
  }

  double g1_at(int i, int j) const {
    if (i < 0 || j < 0 || i >= n || j >= n) return 0.0;
    return g1[i][j];
  }
  double g2_at(int i, int j) const {
    if (i < 0 || j < 0 || i + 1 >= n || j + 1 >= n) return 0.0;
    return g2[i][j];
  }
};

// Loop-integral contribution (1/2) * \oint (x dy - y dx) of one curve,
// traversed in its own parameter direction.
double curve_area_term(const std::vector<Point2>& pts, const DegreeTables& t) {
  const int n = t.n;
  double xdy = 0.0, ydx = 0.0;
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j < n; ++j) {
      const double w = t.i1[k][j];
      xdy += w * pts[k].x * (n * (pts[j + 1].y - pts[j].y));
      ydx += w * pts[k].y * (n * (pts[j + 1].x - pts[j].x));
    }
  }
  return 0.5 * (xdy - ydx);
}

// d(area term)/d s_k for an interior control point k.
Vec2 curve_area_grad(const std::vector<Point2>& pts, const DegreeTables& t, int k) {
  const int n = t.n;
  double gx = 0.0, gy = 0.0;
  for (int j = 0; j < n; ++j) {
    const double w = t.i1[k][j];
    gx += w * (n * (pts[j + 1].y - pts[j].y));
    gy -= w * (n * (pts[j + 1].x - pts[j].x));
  }
  return {gx, gy};
}

double stretch_energy(const std::vector<Point2>& pts, const DegreeTables& t) {
  const int n = t.n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec2 hi = static_cast<double>(n) * (pts[i + 1] - pts[i]);
    for (int j = 0; j < n; ++j) {
      const Vec2 hj = static_cast<double>(n) * (pts[j + 1] - pts[j]);
      acc += t.g1[i][j] * dot(hi, hj);
    }
  }
  return acc;
}

double strain_energy(const std::vector<Point2>& pts, const DegreeTables& t) {
  const int n = t.n;
  if (n < 2) return 0.0;
  const double c = static_cast<double>(n) * (n - 1);
  double acc = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    const Vec2 hi = c * (pts[i] - 2.0 * pts[i + 1] + pts[i + 2]);
    for (int j = 0; j + 1 < n; ++j) {
      const Vec2 hj = c * (pts[j] - 2.0 * pts[j + 1] + pts[j + 2]);
      acc += t.g2[i][j] * dot(hi, hj);
    }
  }
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------

PatchLayout init_segmentation_curves(const QuadMesh& mesh,
                                     const std::vector<SegmentChain>& chains,
                                     int degree) {
  const int n = degree;
  if (n < 4) throw std::invalid_argument("segmentation: degree must be at least 4");
  std::vector<SegmentationCurve> curves;

  const auto eq = mesh.edge_quads();
  for (const auto& [edge, quads] : eq) {
    (void)quads;
    SegmentationCurve sc;
    sc.v_start = edge.first;
    sc.v_end = edge.second;
    auto bit = mesh.boundary_edges.find(edge);
    if (bit != mesh.boundary_edges.end()) {
      sc.fixed = true;
      sc.source = bit->second;
      if (bit->second.is_bridge()) {
        std::vector<Point2> pts(n + 1);
        for (int k = 0; k <= n; ++k)
          pts[k] = mesh.positions[edge.first] +
                   (static_cast<double>(k) / n) *
                       (mesh.positions[edge.second] - mesh.positions[edge.first]);
        sc.curve = BezierCurve(std::move(pts));
      } else {
        const BezierCurve& seg = chains[bit->second.chain].segments[bit->second.segment];
        if (seg.degree() != n)
          throw std::invalid_argument("segmentation: chain degree mismatch");
        // Chain segments run along the boundary loop; key order may flip them.
        const Point2 a = mesh.positions[edge.first];
        if (dist(seg.pts.front(), a) <= dist(seg.pts.back(), a))
          sc.curve = seg;
        else
          sc.curve = seg.reversed();
      }
    } else {
      std::vector<Point2> pts(n + 1);
      for (int k = 0; k <= n; ++k)
        pts[k] = mesh.positions[edge.first] +
                 (static_cast<double>(k) / n) *
                     (mesh.positions[edge.second] - mesh.positions[edge.first]);
      sc.curve = BezierCurve(std::move(pts));
    }
    // Pin endpoints to the mesh vertices exactly.
    sc.curve.pts.front() = mesh.positions[edge.first];
    sc.curve.pts.back() = mesh.positions[edge.second];
    curves.push_back(std::move(sc));
  }
  return assemble_layout(mesh, n, std::move(curves));
}

PatchLayout assemble_layout(const QuadMesh& mesh, int degree,
                            std::vector<SegmentationCurve> curves) {
  const int n = degree;
  PatchLayout layout;
  layout.mesh = mesh;
  layout.degree = n;
  layout.curves = std::move(curves);
  for (std::size_t ci = 0; ci < layout.curves.size(); ++ci) {
    const SegmentationCurve& sc = layout.curves[ci];
    layout.edge_curve[{std::min(sc.v_start, sc.v_end),
                       std::max(sc.v_start, sc.v_end)}] = static_cast<int>(ci);
  }

  layout.quad_curves.resize(mesh.quads.size());
  layout.quad_curve_forward.resize(mesh.quads.size());
  for (std::size_t q = 0; q < mesh.quads.size(); ++q) {
    for (int k = 0; k < 4; ++k) {
      const int a = mesh.quads[q][k];
      const int b = mesh.quads[q][(k + 1) % 4];
      const int c = layout.edge_curve.at({std::min(a, b), std::max(a, b)});
      layout.quad_curves[q][k] = c;
      layout.quad_curve_forward[q][k] = layout.curves[c].v_start == a;
    }
  }

  // Vertex stars: incident curve ends in CCW order, with the wedge quad
  // between consecutive entries.
  std::map<std::tuple<int, int, int>, int> wedge;  // (v, min(u1,u2), max) -> quad
  for (std::size_t q = 0; q < mesh.quads.size(); ++q) {
    for (int k = 0; k < 4; ++k) {
      const int v = mesh.quads[q][k];
      const int u1 = mesh.quads[q][(k + 3) % 4];
      const int u2 = mesh.quads[q][(k + 1) % 4];
      wedge[{v, std::min(u1, u2), std::max(u1, u2)}] = static_cast<int>(q);
    }
  }

  layout.stars.resize(mesh.positions.size());
  std::vector<std::vector<int>> incident(mesh.positions.size());
  for (const auto& [edge, cidx] : layout.edge_curve) {
    incident[edge.first].push_back(cidx);
    incident[edge.second].push_back(cidx);
  }
  for (std::size_t v = 0; v < mesh.positions.size(); ++v) {
    VertexStar& star = layout.stars[v];
    star.vertex = static_cast<int>(v);
    star.interior = !mesh.boundary_vertex[v];
    if (incident[v].empty()) continue;
    struct Ent {
      double angle;
      StarEntry e;
      int other;
    };
    std::vector<Ent> ents;
    for (int cidx : incident[v]) {
      const SegmentationCurve& sc = layout.curves[cidx];
      const bool at_start = sc.v_start == static_cast<int>(v);
      const int other = at_start ? sc.v_end : sc.v_start;
      const Vec2 d = mesh.positions[other] - mesh.positions[v];
      ents.push_back({std::atan2(d.y, d.x), {cidx, at_start}, other});
    }
    std::sort(ents.begin(), ents.end(), [](const Ent& a, const Ent& b) {
      if (a.angle != b.angle) return a.angle < b.angle;
      return a.e.curve < b.e.curve;
    });
    // Rotate so that the single exterior gap (boundary vertices) sits between
    // the last and first entry.
    const std::size_t rho = ents.size();
    auto wedge_at = [&](std::size_t i) {
      const int u1 = ents[i].other;
      const int u2 = ents[(i + 1) % rho].other;
      auto it = wedge.find({static_cast<int>(v), std::min(u1, u2), std::max(u1, u2)});
      return it == wedge.end() ? -1 : it->second;
    };
    if (!star.interior && rho > 1) {
      std::size_t gap = rho;
      for (std::size_t i = 0; i < rho; ++i)
        if (wedge_at(i) < 0) gap = i;
      if (gap < rho) std::rotate(ents.begin(), ents.begin() + gap + 1, ents.end());
    }
    for (std::size_t i = 0; i < rho; ++i) star.entries.push_back(ents[i].e);
    const std::size_t nwedge = star.interior ? rho : (rho > 0 ? rho - 1 : 0);
    for (std::size_t i = 0; i < nwedge; ++i) star.wedge_quads.push_back(wedge_at(i));
  }
  return layout;
}

// ---------------------------------------------------------------------------

double region_area(const std::vector<const BezierCurve*>& curves,
                   const std::vector<bool>& forward) {
  if (curves.empty()) throw std::domain_error("region_area: empty loop");
  if (curves.size() != forward.size())
    throw std::domain_error("region_area: orientation list mismatch");
  const int n = curves[0]->degree();
  for (const BezierCurve* c : curves) {
    if (c->degree() != n) throw std::domain_error("region_area: mixed degrees");
  }
  // Closed loop check, corner to corner.
  const double scale = [&] {
    BBox box;
    for (const BezierCurve* c : curves)
      for (const Point2& p : c->pts) box.expand(p);
    return std::max(box.diag(), 1e-30);
  }();
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const std::size_t k2 = (k + 1) % curves.size();
    const Point2 end = forward[k] ? curves[k]->pts.back() : curves[k]->pts.front();
    const Point2 begin = forward[k2] ? curves[k2]->pts.front() : curves[k2]->pts.back();
    if (dist(end, begin) > 1e-9 * scale)
      throw std::domain_error("region_area: loop is not closed");
  }
  const DegreeTables t(n);
  double area = 0.0;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const double a = curve_area_term(curves[k]->pts, t);
    area += forward[k] ? a : -a;
  }
  return area;
}

double quad_area(const PatchLayout& layout, int quad) {
  std::vector<const BezierCurve*> cs;
  std::vector<bool> fw;
  for (int k = 0; k < 4; ++k) {
    cs.push_back(&layout.curves[layout.quad_curves[quad][k]].curve);
    fw.push_back(layout.quad_curve_forward[quad][k]);
  }
  return region_area(cs, fw);
}

double f_uniform(const PatchLayout& layout) {
  const std::size_t L = layout.mesh.quads.size();
  if (L == 0) return 0.0;
  std::vector<double> areas(L);
  double total = 0.0;
  for (std::size_t q = 0; q < L; ++q) {
    areas[q] = quad_area(layout, static_cast<int>(q));
    total += areas[q];
  }
  const double avg = total / static_cast<double>(L);
  double acc = 0.0;
  for (double a : areas) acc += (a - avg) * (a - avg);
  return acc / static_cast<double>(L);
}

double f_shape(const PatchLayout& layout, double sigma1, double sigma2) {
  const DegreeTables t(layout.degree);
  double acc = 0.0;
  for (const SegmentationCurve& sc : layout.curves) {
    if (sc.fixed) continue;
    acc += sigma1 * stretch_energy(sc.curve.pts, t) +
           sigma2 * strain_energy(sc.curve.pts, t);
  }
  return acc;
}

namespace {

Vec2 star_tangent(const PatchLayout& layout, const StarEntry& e) {
  const SegmentationCurve& sc = layout.curves[e.curve];
  const int n = sc.curve.degree();
  if (e.at_start) return static_cast<double>(n) * (sc.curve.pts[1] - sc.curve.pts[0]);
  return static_cast<double>(n) * (sc.curve.pts[n - 1] - sc.curve.pts[n]);
}

}  // namespace

double f_tangent(const PatchLayout& layout) {
  double acc = 0.0;
  for (const VertexStar& star : layout.stars) {
    if (!star.interior || star.entries.size() < 2) continue;
    const std::size_t rho = star.entries.size();
    const double c0 = std::cos(2.0 * kPi / static_cast<double>(rho));
    for (std::size_t i = 0; i < rho; ++i) {
      const Vec2 ti = star_tangent(layout, star.entries[i]);
      const Vec2 tj = star_tangent(layout, star.entries[(i + 1) % rho]);
      const double ni = norm(ti), nj = norm(tj);
      if (ni < 1e-300 || nj < 1e-300) {
        acc += 4.0;
        continue;
      }
      const double c = dot(ti, tj) / (ni * nj);
      acc += (c - c0) * (c - c0);
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------

struct SegmentationObjective::Impl {
  const PatchLayout* layout;
  GlobalObjectiveConfig cfg;
  std::vector<double> shape_scale;
  DegreeTables tables;
  int n;
  std::vector<int> var_base;  // per curve; -1 for fixed curves
  int dim = 0;

  Impl(const PatchLayout& l, const GlobalObjectiveConfig& c,
       const std::vector<double>* scale)
      : layout(&l), cfg(c), tables(l.degree), n(l.degree) {
    shape_scale.assign(l.curves.size(), 1.0);
    if (scale) {
      if (scale->size() != l.curves.size())
        throw std::invalid_argument("segmentation: shape_scale size mismatch");
      shape_scale = *scale;
    }
    var_base.assign(l.curves.size(), -1);
    for (std::size_t ci = 0; ci < l.curves.size(); ++ci) {
      if (l.curves[ci].fixed) continue;
      var_base[ci] = dim;
      dim += 2 * (n - 1);
    }
  }

  std::vector<std::vector<Point2>> materialize(const Eigen::VectorXd& x) const {
    std::vector<std::vector<Point2>> pts(layout->curves.size());
    for (std::size_t ci = 0; ci < layout->curves.size(); ++ci) {
      pts[ci] = layout->curves[ci].curve.pts;
      const int base = var_base[ci];
      if (base < 0) continue;
      for (int k = 1; k < n; ++k) {
        pts[ci][k].x = x[base + 2 * (k - 1)];
        pts[ci][k].y = x[base + 2 * (k - 1) + 1];
      }
    }
    return pts;
  }

  void add_grad(Eigen::VectorXd* g, int curve, int k, const Vec2& v) const {
    if (!g) return;
    const int base = var_base[curve];
    if (base < 0 || k < 1 || k > n - 1) return;
    (*g)[base + 2 * (k - 1)] += v.x;
    (*g)[base + 2 * (k - 1) + 1] += v.y;
  }

  double uniform_term(const std::vector<std::vector<Point2>>& pts,
                      Eigen::VectorXd* g) const {
    const std::size_t L = layout->mesh.quads.size();
    if (L == 0) return 0.0;
    std::vector<double> curve_terms(layout->curves.size());
    for (std::size_t ci = 0; ci < layout->curves.size(); ++ci)
      curve_terms[ci] = curve_area_term(pts[ci], tables);
    std::vector<double> areas(L, 0.0);
    double total = 0.0;
    for (std::size_t q = 0; q < L; ++q) {
      for (int k = 0; k < 4; ++k) {
        const double a = curve_terms[layout->quad_curves[q][k]];
        areas[q] += layout->quad_curve_forward[q][k] ? a : -a;
      }
      total += areas[q];
    }
    const double avg = total / static_cast<double>(L);
    double f = 0.0;
    for (double a : areas) f += (a - avg) * (a - avg);
    f /= static_cast<double>(L);
    if (g) {
      std::vector<double> curve_coef(layout->curves.size(), 0.0);
      for (std::size_t q = 0; q < L; ++q) {
        const double w = 2.0 / static_cast<double>(L) * (areas[q] - avg);
        for (int k = 0; k < 4; ++k) {
          const int ci = layout->quad_curves[q][k];
          curve_coef[ci] += layout->quad_curve_forward[q][k] ? w : -w;
        }
      }
      for (std::size_t ci = 0; ci < layout->curves.size(); ++ci) {
        if (var_base[ci] < 0 || curve_coef[ci] == 0.0) continue;
        for (int k = 1; k < n; ++k)
          add_grad(g, static_cast<int>(ci), k,
                   curve_coef[ci] * curve_area_grad(pts[ci], tables, k));
      }
    }
    return f;
  }

  double shape_term(const std::vector<std::vector<Point2>>& pts, Eigen::VectorXd* g,
                    bool apply_scale) const {
    double f = 0.0;
    for (std::size_t ci = 0; ci < layout->curves.size(); ++ci) {
      if (layout->curves[ci].fixed) continue;
      const double scale = apply_scale ? shape_scale[ci] : 1.0;
      const std::vector<Point2>& p = pts[ci];
      f += scale * (cfg.sigma1 * stretch_energy(p, tables) +
                    cfg.sigma2 * strain_energy(p, tables));
      if (!g) continue;
      for (int k = 1; k < n; ++k) {
        Vec2 gs{0.0, 0.0};
        // Stretch: 2 n sum_j (G1[k-1][j] - G1[k][j]) h_j.
        for (int j = 0; j < n; ++j) {
          const Vec2 hj = static_cast<double>(n) * (p[j + 1] - p[j]);
          const double w = tables.g1_at(k - 1, j) - tables.g1_at(k, j);
          gs += (2.0 * n * cfg.sigma1 * w) * hj;
        }
        // Strain: 2 n(n-1) sum_j (G2[k][j] - 2 G2[k-1][j] + G2[k-2][j]) hh_j.
        const double cc = static_cast<double>(n) * (n - 1);
        for (int j = 0; j + 1 < n; ++j) {
          const Vec2 hhj = cc * (p[j] - 2.0 * p[j + 1] + p[j + 2]);
          const double w =
              tables.g2_at(k, j) - 2.0 * tables.g2_at(k - 1, j) + tables.g2_at(k - 2, j);
          gs += (2.0 * cc * cfg.sigma2 * w) * hhj;
        }
        add_grad(g, static_cast<int>(ci), k, scale * gs);
      }
    }
    return f;
  }

  double tangent_term(const std::vector<std::vector<Point2>>& pts,
                      Eigen::VectorXd* g) const {
    double f = 0.0;
    for (const VertexStar& star : layout->stars) {
      if (!star.interior || star.entries.size() < 2) continue;
      const std::size_t rho = star.entries.size();
      const double c0 = std::cos(2.0 * kPi / static_cast<double>(rho));
      for (std::size_t i = 0; i < rho; ++i) {
        const StarEntry& ea = star.entries[i];
        const StarEntry& eb = star.entries[(i + 1) % rho];
        auto tangent = [&](const StarEntry& e) {
          const std::vector<Point2>& p = pts[e.curve];
          return e.at_start ? static_cast<double>(n) * (p[1] - p[0])
                            : static_cast<double>(n) * (p[n - 1] - p[n]);
        };
        const Vec2 ta = tangent(ea);
        const Vec2 tb = tangent(eb);
        const double na = norm(ta), nb = norm(tb);
        if (na < 1e-300 || nb < 1e-300) {
          f += 4.0;
          continue;
        }
        const double c = dot(ta, tb) / (na * nb);
        f += (c - c0) * (c - c0);
        if (!g) continue;
        const double w = 2.0 * (c - c0);
        const Vec2 dca = tb / (na * nb) - (c / (na * na)) * ta;
        const Vec2 dcb = ta / (na * nb) - (c / (nb * nb)) * tb;
        add_grad(g, ea.curve, ea.at_start ? 1 : n - 1,
                 (w * static_cast<double>(n)) * dca);
        add_grad(g, eb.curve, eb.at_start ? 1 : n - 1,
                 (w * static_cast<double>(n)) * dcb);
      }
    }
    return f;
  }
};

SegmentationObjective::SegmentationObjective(const PatchLayout& layout,
                                             const GlobalObjectiveConfig& cfg,
                                             const std::vector<double>* shape_scale)
    : impl(new Impl(layout, cfg, shape_scale)) {}

SegmentationObjective::~SegmentationObjective() { delete impl; }

int SegmentationObjective::dimension() const { return impl->dim; }

Eigen::VectorXd SegmentationObjective::pack() const {
  Eigen::VectorXd x(impl->dim);
  const PatchLayout& l = *impl->layout;
  for (std::size_t ci = 0; ci < l.curves.size(); ++ci) {
    const int base = impl->var_base[ci];
    if (base < 0) continue;
    for (int k = 1; k < impl->n; ++k) {
      x[base + 2 * (k - 1)] = l.curves[ci].curve.pts[k].x;
      x[base + 2 * (k - 1) + 1] = l.curves[ci].curve.pts[k].y;
    }
  }
  return x;
}

void SegmentationObjective::unpack(const Eigen::VectorXd& x, PatchLayout& layout) const {
  for (std::size_t ci = 0; ci < layout.curves.size(); ++ci) {
    const int base = impl->var_base[ci];
    if (base < 0) continue;
    for (int k = 1; k < impl->n; ++k) {
      layout.curves[ci].curve.pts[k].x = x[base + 2 * (k - 1)];
      layout.curves[ci].curve.pts[k].y = x[base + 2 * (k - 1) + 1];
    }
  }
}

double SegmentationObjective::value(const Eigen::VectorXd& x) const {
  Eigen::VectorXd dummy;
  const auto pts = impl->materialize(x);
  return impl->cfg.w1 * impl->uniform_term(pts, nullptr) +
         impl->cfg.w2 * impl->shape_term(pts, nullptr, true) +
         impl->cfg.w3 * impl->tangent_term(pts, nullptr);
}

double SegmentationObjective::value_and_gradient(const Eigen::VectorXd& x,
                                                 Eigen::VectorXd& grad) const {
  const auto pts = impl->materialize(x);
  grad = Eigen::VectorXd::Zero(impl->dim);
  Eigen::VectorXd gu = Eigen::VectorXd::Zero(impl->dim);
  Eigen::VectorXd gs = Eigen::VectorXd::Zero(impl->dim);
  Eigen::VectorXd gt = Eigen::VectorXd::Zero(impl->dim);
  const double fu = impl->uniform_term(pts, &gu);
  const double fs = impl->shape_term(pts, &gs, true);
  const double ft = impl->tangent_term(pts, &gt);
  grad = impl->cfg.w1 * gu + impl->cfg.w2 * gs + impl->cfg.w3 * gt;
  return impl->cfg.w1 * fu + impl->cfg.w2 * fs + impl->cfg.w3 * ft;
}

double SegmentationObjective::term_uniform(const Eigen::VectorXd& x,
                                           Eigen::VectorXd* grad) const {
  const auto pts = impl->materialize(x);
  if (grad) *grad = Eigen::VectorXd::Zero(impl->dim);
  return impl->uniform_term(pts, grad);
}

double SegmentationObjective::term_shape(const Eigen::VectorXd& x,
                                         Eigen::VectorXd* grad) const {
  const auto pts = impl->materialize(x);
  if (grad) *grad = Eigen::VectorXd::Zero(impl->dim);
  return impl->shape_term(pts, grad, false);
}

double SegmentationObjective::term_tangent(const Eigen::VectorXd& x,
                                           Eigen::VectorXd* grad) const {
  const auto pts = impl->materialize(x);
  if (grad) *grad = Eigen::VectorXd::Zero(impl->dim);
  return impl->tangent_term(pts, grad);
}

OptimizeReport optimize_segmentation(PatchLayout& layout,
                                     const GlobalObjectiveConfig& cfg,
                                     const std::vector<double>* shape_scale,
                                     const OptimizerTrace& trace) {
  SegmentationObjective obj(layout, cfg, shape_scale);
  OptimizeReport rep;
  if (obj.dimension() == 0) {
    rep.converged = true;
    return rep;
  }
  Eigen::VectorXd x0 = obj.pack();
  Eigen::VectorXd g0(obj.dimension());
  rep.f_initial = obj.value_and_gradient(x0, g0);

  LbfgsOptions opt;
  opt.memory = cfg.lbfgs_memory;
  opt.max_iterations = cfg.max_iterations;
  opt.grad_tolerance = cfg.grad_tolerance * (1.0 + std::abs(rep.f_initial));

  auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return obj.value_and_gradient(x, g);
  };
  LbfgsResult res = lbfgs_minimize(fg, x0, opt, trace);
  rep.f_final = res.f;
  rep.iterations = res.iterations;
  rep.converged = res.status == LbfgsStatus::Converged;
  rep.line_search_failed = res.status == LbfgsStatus::LineSearchFailed;
  if (res.f <= rep.f_initial)
    obj.unpack(res.x, layout);
  else
    rep.f_final = rep.f_initial;
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

// Separating-axis disjointness for possibly degenerate triangles.
bool triangles_disjoint_sat(const std::array<Point2, 3>& a,
                            const std::array<Point2, 3>& b, double eps) {
  std::vector<Vec2> axes;
  auto push_edges = [&](const std::array<Point2, 3>& t) {
    for (int i = 0; i < 3; ++i) {
      const Vec2 e = t[(i + 1) % 3] - t[i];
      const double len = norm(e);
      if (len < 1e-300) continue;
      axes.push_back({-e.y / len, e.x / len});
      axes.push_back({e.x / len, e.y / len});
    }
  };
  push_edges(a);
  push_edges(b);
  if (axes.empty()) return dist(a[0], b[0]) > eps;
  for (const Vec2& ax : axes) {
    double amin = std::numeric_limits<double>::max(), amax = -amin;
    double bmin = amin, bmax = -amin;
    for (const Point2& p : a) {
      const double d = dot(ax, p);
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (const Point2& p : b) {
      const double d = dot(ax, p);
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    if (bmin - amax > eps || amin - bmax > eps) return true;
  }
  return false;
}

// Does the closed angular sector spanned by (c1, c2) contain direction d?
bool cone_contains(Vec2 c1, Vec2 c2, const Vec2& d, double eps) {
  const double cr = cross(c1, c2);
  if (std::abs(cr) <= eps) {
    if (dot(c1, c2) >= 0.0)  // single ray
      return std::abs(cross(c1, d)) <= eps && dot(c1, d) > 0.0;
    // Opposite generators: the sector degenerates to the full line.
    return std::abs(cross(c1, d)) <= eps;
  }
  if (cr < 0.0) std::swap(c1, c2);
  return cross(c1, d) >= -eps && cross(d, c2) >= -eps;
}

// Overlap of the tangent cones of two triangles sharing corner v; {a1,a2} and
// {b1,b2} are the other corners. Empty overlap means the triangles meet only
// at v.
bool cones_overlap(const Point2& v, const Point2& a1, const Point2& a2,
                   const Point2& b1, const Point2& b2, double scale) {
  const double eps = 1e-12 * scale;
  std::vector<Vec2> ga, gb;
  for (const Point2& p : {a1, a2}) {
    const Vec2 d = p - v;
    if (norm(d) > eps) ga.push_back(d / norm(d));
  }
  for (const Point2& p : {b1, b2}) {
    const Vec2 d = p - v;
    if (norm(d) > eps) gb.push_back(d / norm(d));
  }
  if (ga.empty() || gb.empty()) return false;
  if (ga.size() == 1) ga.push_back(ga[0]);
  if (gb.size() == 1) gb.push_back(gb[0]);
  const double ceps = 1e-12;
  for (const Vec2& d : gb)
    if (cone_contains(ga[0], ga[1], d, ceps)) return true;
  for (const Vec2& d : ga)
    if (cone_contains(gb[0], gb[1], d, ceps)) return true;
  return false;
}

}  // namespace

ValidityReport check_layout_validity(const PatchLayout& layout) {
  ValidityReport rep;
  const int n = layout.degree;
  const auto eq = layout.mesh.edge_quads();

  // Neighbor curves: those sharing a quad.
  std::vector<std::set<int>> neighbors(layout.curves.size());
  for (std::size_t q = 0; q < layout.quad_curves.size(); ++q) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) neighbors[layout.quad_curves[q][i]].insert(layout.quad_curves[q][j]);
  }

  BBox box;
  for (const Point2& p : layout.mesh.positions) box.expand(p);
  const double scale = std::max(box.diag(), 1e-30);
  const double eps = 1e-12 * scale;

  std::set<std::pair<int, int>> done;
  for (std::size_t ka = 0; ka < layout.curves.size(); ++ka) {
    if (layout.curves[ka].fixed) continue;
    for (int kb : neighbors[ka]) {
      const auto key = std::minmax(static_cast<int>(ka), kb);
      if (!done.insert({key.first, key.second}).second) continue;
      const std::vector<Point2>& pa = layout.curves[ka].curve.pts;
      const std::vector<Point2>& pb = layout.curves[kb].curve.pts;

      // Shared endpoints (by mesh vertex id).
      std::vector<std::pair<int, int>> shared;  // (end index in a, in b): 0 or n
      for (int ea : {0, 1})
        for (int eb : {0, 1}) {
          const int va = ea == 0 ? layout.curves[ka].v_start : layout.curves[ka].v_end;
          const int vb = eb == 0 ? layout.curves[kb].v_start : layout.curves[kb].v_end;
          if (va == vb) shared.push_back({ea == 0 ? 0 : n, eb == 0 ? 0 : n});
        }

      for (int i = 1; i <= n - 1; ++i) {
        const std::array<Point2, 3> ta{pa[i - 1], pa[i], pa[i + 1]};
        for (int l = 1; l <= n - 1; ++l) {
          const std::array<Point2, 3> tb{pb[l - 1], pb[l], pb[l + 1]};
          // Triangles holding a shared endpoint as a corner use the cone rule.
          bool special = false;
          bool hit = false;
          for (const auto& [ea, eb] : shared) {
            const bool a_has = (ea == 0 && i == 1) || (ea == n && i == n - 1);
            const bool b_has = (eb == 0 && l == 1) || (eb == n && l == n - 1);
            if (a_has && b_has) {
              special = true;
              const Point2& v = ea == 0 ? pa[0] : pa[n];
              const Point2& a1 = ea == 0 ? pa[1] : pa[n - 1];
              const Point2& a2 = ea == 0 ? pa[2] : pa[n - 2];
              const Point2& b1 = eb == 0 ? pb[1] : pb[n - 1];
              const Point2& b2 = eb == 0 ? pb[2] : pb[n - 2];
              hit = cones_overlap(v, a1, a2, b1, b2, scale);
            }
          }
          if (!special) hit = !triangles_disjoint_sat(ta, tb, eps);
          if (hit)
            rep.violations.push_back({static_cast<int>(ka), i, kb, l});
        }
      }
    }
  }
  return rep;
}

}  // namespace bezpar

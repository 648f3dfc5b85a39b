#include "bezpar/patchfit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bezpar {

namespace {

// Evaluate a rectangular control net of degrees (du, dv) by de Casteljau.
Point2 eval_net(const std::vector<Point2>& net, int du, int dv, double u, double v) {
  std::vector<Point2> col(dv + 1);
  std::vector<Point2> row(du + 1);
  for (int j = 0; j <= dv; ++j) {
    for (int i = 0; i <= du; ++i) row[i] = net[i * (dv + 1) + j];
    for (int r = 1; r <= du; ++r)
      for (int i = 0; i <= du - r; ++i) row[i] = (1.0 - u) * row[i] + u * row[i + 1];
    col[j] = row[0];
  }
  for (int r = 1; r <= dv; ++r)
    for (int j = 0; j <= dv - r; ++j) col[j] = (1.0 - v) * col[j] + v * col[j + 1];
  return col[0];
}

}  // namespace

Point2 BezierPatch::eval(double u, double v) const { return eval_net(net, n, n, u, v); }

Vec2 BezierPatch::deriv_u(double u, double v) const {
  std::vector<Point2> d(n * (n + 1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= n; ++j)
      d[i * (n + 1) + j] = static_cast<double>(n) * (at(i + 1, j) - at(i, j));
  return eval_net(d, n - 1, n, u, v);
}

Vec2 BezierPatch::deriv_v(double u, double v) const {
  std::vector<Point2> d((n + 1) * n);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j < n; ++j)
      d[i * n + j] = static_cast<double>(n) * (at(i, j + 1) - at(i, j));
  return eval_net(d, n, n - 1, u, v);
}

TensorPoly BezierPatch::coord_field(int axis) const {
  TensorPoly t(n, n);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) t.at(i, j) = axis == 0 ? at(i, j).x : at(i, j).y;
  return t;
}

std::array<int, 2> side_boundary_index(int n, int side, int k) {
  switch (side) {
    case 0: return {k, 0};
    case 1: return {n, k};
    case 2: return {n - k, n};
    default: return {0, n - k};
  }
}

std::array<int, 2> side_flank_index(int n, int side, int k) {
  switch (side) {
    case 0: return {k, 1};
    case 1: return {n - 1, k};
    case 2: return {n - k, n - 1};
    default: return {1, n - k};
  }
}

std::array<int, 2> corner_adjacent_index(int n, int corner) {
  switch (corner) {
    case 0: return {1, 1};
    case 1: return {n - 1, 1};
    case 2: return {n - 1, n - 1};
    default: return {1, n - 1};
  }
}

// ---------------------------------------------------------------------------

std::vector<BezierPatch> build_patches(const PatchLayout& layout) {
  const int n = layout.degree;
  std::vector<BezierPatch> patches;
  patches.reserve(layout.mesh.quads.size());
  for (std::size_t q = 0; q < layout.mesh.quads.size(); ++q) {
    BezierPatch p(n, static_cast<int>(q));
    for (int side = 0; side < 4; ++side) {
      const SegmentationCurve& sc = layout.side_curve(static_cast<int>(q), side);
      const bool fw = layout.quad_curve_forward[q][side];
      for (int k = 0; k <= n; ++k) {
        const auto [i, j] = side_boundary_index(n, side, k);
        p.at(i, j) = fw ? sc.curve.pts[k] : sc.curve.pts[n - k];
      }
    }
    for (int i = 1; i < n; ++i) {
      for (int j = 1; j < n; ++j) {
        const double xi = static_cast<double>(i) / n;
        const double eta = static_cast<double>(j) / n;
        p.at(i, j) = (1.0 - xi) * p.at(0, j) + xi * p.at(n, j) +
                     (1.0 - eta) * p.at(i, 0) + eta * p.at(i, n) -
                     ((1.0 - xi) * (1.0 - eta) * p.at(0, 0) +
                      xi * (1.0 - eta) * p.at(n, 0) + xi * eta * p.at(n, n) +
                      (1.0 - xi) * eta * p.at(0, n));
      }
    }
    patches.push_back(std::move(p));
  }
  return patches;
}

// ---------------------------------------------------------------------------

namespace {

Point2& vertex_adjacent_point(SegmentationCurve& sc, bool at_start) {
  return at_start ? sc.curve.pts[1] : sc.curve.pts[sc.curve.degree() - 1];
}

Point2 vertex_adjacent_point(const SegmentationCurve& sc, bool at_start) {
  return at_start ? sc.curve.pts[1] : sc.curve.pts[sc.curve.degree() - 1];
}

Point2 vertex_second_point(const SegmentationCurve& sc, bool at_start) {
  return at_start ? sc.curve.pts[2] : sc.curve.pts[sc.curve.degree() - 2];
}

}  // namespace

void snap_regular_vertices(PatchLayout& layout) {
  for (const VertexStar& star : layout.stars) {
    if (!star.interior || star.entries.size() != 4) continue;
    const Point2 v = layout.mesh.positions[star.vertex];
    for (int pair = 0; pair < 2; ++pair) {
      const StarEntry& ea = star.entries[pair];
      const StarEntry& eb = star.entries[pair + 2];
      Point2& pa = vertex_adjacent_point(layout.curves[ea.curve], ea.at_start);
      Point2& pb = vertex_adjacent_point(layout.curves[eb.curve], eb.at_start);
      const Vec2 e = pa + pb - 2.0 * v;
      pa -= 0.5 * e;
      pb -= 0.5 * e;
    }
  }
}

// ---------------------------------------------------------------------------

void init_second_layer(BezierPatch& patch, PatchFitFlags* flags) {
  const int n = patch.n;
  // 1/n offset rule, averaging the two assignments at corner-adjacent points.
  std::vector<Vec2> acc((n + 1) * (n + 1), Vec2{0.0, 0.0});
  std::vector<int> cnt((n + 1) * (n + 1), 0);
  auto accumulate = [&](int i, int j, const Point2& p) {
    acc[i * (n + 1) + j] += p;
    ++cnt[i * (n + 1) + j];
  };
  for (int i = 1; i < n; ++i) {
    accumulate(i, 1, patch.at(i, 0) + (patch.at(i, n) - patch.at(i, 0)) / n);
    accumulate(i, n - 1, patch.at(i, n) + (patch.at(i, 0) - patch.at(i, n)) / n);
    accumulate(1, i, patch.at(0, i) + (patch.at(n, i) - patch.at(0, i)) / n);
    accumulate(n - 1, i, patch.at(n, i) + (patch.at(0, i) - patch.at(n, i)) / n);
  }
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      if (cnt[i * (n + 1) + j] > 0)
        patch.at(i, j) = acc[i * (n + 1) + j] / cnt[i * (n + 1) + j];

  // Per-side orthogonality optimization over the side-interior flank points.
  const int nfree = n - 3;
  if (nfree <= 0) return;
  for (int side = 0; side < 4; ++side) {
    std::vector<Point2> bd(n + 1);
    for (int k = 0; k <= n; ++k) {
      const auto [i, j] = side_boundary_index(n, side, k);
      bd[k] = patch.at(i, j);
    }
    // Tangential derivative of the boundary curve (fixed).
    std::vector<double> ax(n), ay(n);
    for (int k = 0; k < n; ++k) {
      ax[k] = n * (bd[k + 1].x - bd[k].x);
      ay[k] = n * (bd[k + 1].y - bd[k].y);
    }
    const Polynomial1D alongx{std::vector<double>(ax)};
    const Polynomial1D alongy{std::vector<double>(ay)};

    // psi_k = n * B_k^n * along, the sensitivity of <cross, along> to the
    // k-th flank point.
    std::vector<Polynomial1D> psix, psiy;
    for (int k = 2; k <= n - 2; ++k) {
      std::vector<double> e(n + 1, 0.0);
      e[k] = static_cast<double>(n);
      const Polynomial1D bk{std::move(e)};
      psix.push_back(poly_product(bk, alongx));
      psiy.push_back(poly_product(bk, alongy));
    }
    Eigen::MatrixXd h(2 * nfree, 2 * nfree);
    for (int a = 0; a < nfree; ++a) {
      for (int b = 0; b < nfree; ++b) {
        h(2 * a, 2 * b) = 2.0 * poly_integral(poly_product(psix[a], psix[b]));
        h(2 * a, 2 * b + 1) = 2.0 * poly_integral(poly_product(psix[a], psiy[b]));
        h(2 * a + 1, 2 * b) = 2.0 * poly_integral(poly_product(psiy[a], psix[b]));
        h(2 * a + 1, 2 * b + 1) = 2.0 * poly_integral(poly_product(psiy[a], psiy[b]));
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
    const double cutoff = 1e-8 * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    // The functional only controls the component of the flank row along the
    // boundary tangent; cap the step so weakly determined directions stay
    // near the offset initialization.
    double side_len = 0.0;
    for (int k = 0; k < n; ++k) side_len += dist(bd[k + 1], bd[k]);
    const double step_cap = 0.5 * side_len / n;

    auto objective_and_grad = [&](Eigen::VectorXd* grad) {
      std::vector<double> cx(n + 1), cy(n + 1);
      for (int k = 0; k <= n; ++k) {
        const auto [fi, fj] = side_flank_index(n, side, k);
        cx[k] = n * (bd[k].x - patch.at(fi, fj).x);
        cy[k] = n * (bd[k].y - patch.at(fi, fj).y);
      }
      const Polynomial1D g = poly_sum(poly_product(Polynomial1D{std::move(cx)}, alongx),
                                      poly_product(Polynomial1D{std::move(cy)}, alongy));
      if (grad) {
        for (int a = 0; a < nfree; ++a) {
          (*grad)[2 * a] = -2.0 * poly_integral(poly_product(g, psix[a]));
          (*grad)[2 * a + 1] = -2.0 * poly_integral(poly_product(g, psiy[a]));
        }
      }
      return poly_integral(poly_product(g, g));
    };

    Eigen::VectorXd grad(2 * nfree);
    double f0 = objective_and_grad(&grad);
    std::vector<Point2> saved;
    for (int k = 2; k <= n - 2; ++k) {
      const auto [fi, fj] = side_flank_index(n, side, k);
      saved.push_back(patch.at(fi, fj));
    }
    bool diverged = false;
    for (int it = 0; it < 3; ++it) {
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + std::abs(f0))) break;
      Eigen::VectorXd y = es.eigenvectors().transpose() * grad;
      for (int r = 0; r < y.size(); ++r)
        y[r] = es.eigenvalues()[r] > cutoff ? y[r] / es.eigenvalues()[r] : 0.0;
      Eigen::VectorXd step = -(es.eigenvectors() * y);
      double worst = 0.0;
      for (int a = 0; a < nfree; ++a)
        worst = std::max(worst, std::hypot(step[2 * a], step[2 * a + 1]));
      if (worst > step_cap) step *= step_cap / worst;
      for (int a = 0; a < nfree; ++a) {
        const auto [fi, fj] = side_flank_index(n, side, a + 2);
        patch.at(fi, fj) += Vec2{step[2 * a], step[2 * a + 1]};
      }
      const double f1 = objective_and_grad(&grad);
      if (!(f1 <= f0 * (1.0 + 1e-12) + 1e-300)) {
        diverged = true;
        break;
      }
      f0 = f1;
    }
    if (diverged) {
      for (int a = 0; a < nfree; ++a) {
        const auto [fi, fj] = side_flank_index(n, side, a + 2);
        patch.at(fi, fj) = saved[a];
      }
      if (flags) ++flags->orth_newton_failures;
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

struct CurveUse {
  int patch = -1;
  int side = -1;
  bool forward = true;
};

std::vector<std::vector<CurveUse>> curve_uses(const PatchLayout& layout) {
  std::vector<std::vector<CurveUse>> uses(layout.curves.size());
  for (std::size_t q = 0; q < layout.quad_curves.size(); ++q)
    for (int side = 0; side < 4; ++side)
      uses[layout.quad_curves[q][side]].push_back(
          {static_cast<int>(q), side, layout.quad_curve_forward[q][side]});
  return uses;
}

Point2& flank_point(std::vector<BezierPatch>& patches, const CurveUse& use, int n,
                    int jc) {
  const int k = use.forward ? jc : n - jc;
  const auto [i, j] = side_flank_index(n, use.side, k);
  return patches[use.patch].at(i, j);
}

// Corner-adjacent point of the patch on `quad` at mesh vertex v.
Point2& corner_point(std::vector<BezierPatch>& patches, const PatchLayout& layout,
                     int quad, int v) {
  const auto& qv = layout.mesh.quads[quad];
  for (int c = 0; c < 4; ++c) {
    if (qv[c] == v) {
      const auto [i, j] = corner_adjacent_index(patches[quad].n, c);
      return patches[quad].at(i, j);
    }
  }
  throw std::logic_error("patchfit: vertex not on quad");
}

bool vertex_is_irregular(const PatchLayout& layout, int v) {
  const VertexStar& star = layout.stars[v];
  return star.interior && star.entries.size() != 4;
}

// Minimal-change solution of the alternating chain x_{i-1} + x_i = 2 t_i.
// x_i = c_i + sign_i * p; returns optimal p.
Vec2 chain_solve(const std::vector<Point2>& xbar, const std::vector<Point2>& c,
                 const std::vector<double>& sign) {
  Vec2 acc{0.0, 0.0};
  for (std::size_t i = 0; i < xbar.size(); ++i) acc += sign[i] * (xbar[i] - c[i]);
  return acc / static_cast<double>(xbar.size());
}

}  // namespace

void enforce_c1(const PatchLayout& layout, std::vector<BezierPatch>& patches) {
  const int n = layout.degree;
  const auto uses = curve_uses(layout);

  // Side-interior flank points: per-index minimal-change projection.
  for (std::size_t ci = 0; ci < layout.curves.size(); ++ci) {
    const SegmentationCurve& sc = layout.curves[ci];
    if (sc.fixed || uses[ci].size() != 2) continue;
    for (int jc = 2; jc <= n - 2; ++jc) {
      Point2& pa = flank_point(patches, uses[ci][0], n, jc);
      Point2& pb = flank_point(patches, uses[ci][1], n, jc);
      const Vec2 d = 0.5 * (2.0 * sc.curve.pts[jc] - pa - pb);
      pa += d;
      pb += d;
    }
  }

  // Corner-adjacent points around each vertex.
  for (const VertexStar& star : layout.stars) {
    const std::size_t rho = star.entries.size();
    if (star.interior) {
      if (rho != 4) continue;  // irregular vertices take the G1 route
      std::vector<Point2> t(4);
      for (int i = 0; i < 4; ++i)
        t[i] = vertex_adjacent_point(layout.curves[star.entries[i].curve],
                                     star.entries[i].at_start);
      std::vector<Point2*> x(4);
      std::vector<Point2> xbar(4), c(4);
      std::vector<double> sign(4);
      for (int i = 0; i < 4; ++i) {
        x[i] = &corner_point(patches, layout, star.wedge_quads[i], star.vertex);
        xbar[i] = *x[i];
      }
      c[0] = {0.0, 0.0};
      sign[0] = 1.0;
      for (int i = 1; i < 4; ++i) {
        c[i] = 2.0 * t[i] - c[i - 1];
        sign[i] = -sign[i - 1];
      }
      const Vec2 p = chain_solve(xbar, c, sign);
      for (int i = 0; i < 4; ++i) *x[i] = c[i] + sign[i] * p;
    } else {
      if (rho < 3) continue;  // no interior curve at this boundary vertex
      // Fan: entries 0 and rho-1 are boundary curves, wedges 0..rho-2.
      const std::size_t nw = star.wedge_quads.size();
      if (nw != rho - 1) continue;
      std::vector<Point2*> x(nw);
      std::vector<Point2> xbar(nw), c(nw);
      std::vector<double> sign(nw);
      bool ok = true;
      for (std::size_t i = 0; i < nw; ++i) {
        if (star.wedge_quads[i] < 0) {
          ok = false;
          break;
        }
        x[i] = &corner_point(patches, layout, star.wedge_quads[i], star.vertex);
        xbar[i] = *x[i];
      }
      if (!ok) continue;
      c[0] = {0.0, 0.0};
      sign[0] = 1.0;
      for (std::size_t i = 1; i < nw; ++i) {
        const StarEntry& e = star.entries[i];
        if (layout.curves[e.curve].fixed) {
          ok = false;
          break;
        }
        const Point2 t = vertex_adjacent_point(layout.curves[e.curve], e.at_start);
        c[i] = 2.0 * t - c[i - 1];
        sign[i] = -sign[i - 1];
      }
      if (!ok) continue;
      const Vec2 p = chain_solve(xbar, c, sign);
      for (std::size_t i = 0; i < nw; ++i) *x[i] = c[i] + sign[i] * p;
    }
  }
}

// ---------------------------------------------------------------------------

IrregularStar build_irregular_star(const PatchLayout& layout, int vertex) {
  const VertexStar& vs = layout.stars[vertex];
  IrregularStar star;
  star.vertex = vertex;
  star.center = layout.mesh.positions[vertex];
  star.m = static_cast<int>(vs.entries.size());
  star.curves = vs.entries;
  star.sector_patch = vs.wedge_quads;
  return star;
}

void enforce_g1(IrregularStar& star, const PatchLayout& layout,
                std::vector<BezierPatch>& patches) {
  const int m = star.m;
  const int n = layout.degree;
  if (m < 3) throw std::invalid_argument("patchfit: irregular star needs valence >= 3");

  std::vector<Point2> t1(m), t2(m);
  for (int i = 0; i < m; ++i) {
    const SegmentationCurve& sc = layout.curves[star.curves[i].curve];
    t1[i] = vertex_adjacent_point(sc, star.curves[i].at_start);
    t2[i] = vertex_second_point(sc, star.curves[i].at_start);
  }

  star.alpha.assign(m, 0.0);
  star.beta.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const Vec2 ui = t1[i] - star.center;
    const Vec2 up = t1[(i + 1) % m] - star.center;
    const Vec2 um = t1[(i - 1 + m) % m] - star.center;
    const double det = cross(up, um);
    if (std::abs(det) < 1e-300)
      throw std::runtime_error("patchfit: degenerate tangent configuration at star");
    star.alpha[i] = cross(ui, um) / det;
    star.beta[i] = cross(up, ui) / det;
  }

  double prod_a = 1.0, prod_b = 1.0;
  for (int i = 0; i < m; ++i) {
    prod_a *= star.alpha[i];
    prod_b *= star.beta[i];
  }
  star.det = prod_a + prod_b;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd rhs(m, 2);
  for (int i = 0; i < m; ++i) {
    a(i, i) = star.alpha[i];
    a(i, (i - 1 + m) % m) = star.beta[i];
    const Point2 h = (star.alpha[i] + star.beta[i] - 1.0) * t1[i] +
                     (1.0 - 1.0 / n) * t2[i] + (1.0 / n) * star.center;
    rhs(i, 0) = h.x;
    rhs(i, 1) = h.y;
  }

  Eigen::MatrixXd sol;
  if (std::abs(star.det) < 1e-10) {
    star.fallback = true;
    sol = a.completeOrthogonalDecomposition().solve(rhs);
  } else {
    sol = a.partialPivLu().solve(rhs);
  }
  for (int i = 0; i < m; ++i) {
    Point2& p = corner_point(patches, layout, star.sector_patch[i], star.vertex);
    p = Point2{sol(i, 0), sol(i, 1)};
  }
}

void enforce_g1_all(const PatchLayout& layout, std::vector<BezierPatch>& patches,
                    PatchFitFlags& flags) {
  for (const VertexStar& vs : layout.stars) {
    if (!vertex_is_irregular(layout, vs.vertex)) continue;
    ++flags.irregular_vertices;
    IrregularStar star = build_irregular_star(layout, vs.vertex);
    enforce_g1(star, layout, patches);
    if (star.fallback) ++flags.g1_fallbacks;
  }
}

// ---------------------------------------------------------------------------

double c1_residual(const PatchLayout& layout, const std::vector<BezierPatch>& patches) {
  const int n = layout.degree;
  const auto uses = curve_uses(layout);
  auto& mut = const_cast<std::vector<BezierPatch>&>(patches);
  double worst = 0.0;
  for (std::size_t ci = 0; ci < layout.curves.size(); ++ci) {
    const SegmentationCurve& sc = layout.curves[ci];
    if (sc.fixed || uses[ci].size() != 2) continue;
    const bool start_irregular = vertex_is_irregular(layout, sc.v_start);
    const bool end_irregular = vertex_is_irregular(layout, sc.v_end);
    for (int jc = 1; jc <= n - 1; ++jc) {
      if (jc == 1 && start_irregular) continue;
      if (jc == n - 1 && end_irregular) continue;
      const Point2 pa = flank_point(mut, uses[ci][0], n, jc);
      const Point2 pb = flank_point(mut, uses[ci][1], n, jc);
      worst = std::max(worst, norm(2.0 * sc.curve.pts[jc] - pa - pb));
    }
  }
  return worst;
}

double g1_residual(const PatchLayout& layout, const std::vector<BezierPatch>& patches) {
  const int n = layout.degree;
  auto& mut = const_cast<std::vector<BezierPatch>&>(patches);
  double worst = 0.0;
  for (const VertexStar& vs : layout.stars) {
    if (!vertex_is_irregular(layout, vs.vertex)) continue;
    IrregularStar star = build_irregular_star(layout, vs.vertex);
    const int m = star.m;
    std::vector<Point2> t1(m), t2(m), p11(m);
    for (int i = 0; i < m; ++i) {
      const SegmentationCurve& sc = layout.curves[star.curves[i].curve];
      t1[i] = vertex_adjacent_point(sc, star.curves[i].at_start);
      t2[i] = vertex_second_point(sc, star.curves[i].at_start);
      p11[i] = corner_point(mut, layout, star.sector_patch[i], star.vertex);
    }
    for (int i = 0; i < m; ++i) {
      const Vec2 ui = t1[i] - star.center;
      const Vec2 up = t1[(i + 1) % m] - star.center;
      const Vec2 um = t1[(i - 1 + m) % m] - star.center;
      const double det = cross(up, um);
      if (std::abs(det) < 1e-300) continue;
      const double alpha = cross(ui, um) / det;
      const double beta = cross(up, ui) / det;
      const Vec2 r = static_cast<double>(n) * alpha * (p11[i] - t1[i]) +
                     static_cast<double>(n) * beta * (p11[(i - 1 + m) % m] - t1[i]) -
                     static_cast<double>(n - 1) * (t2[i] - t1[i]) +
                     (t1[i] - star.center);
      worst = std::max(worst, norm(r));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

namespace {

struct EnergyGrams {
  int n;
  std::vector<std::vector<double>> s0;  // \int B^n B^n
  std::vector<std::vector<double>> g1;  // \int B^{n-1} B^{n-1}
  std::vector<std::vector<double>> g2;  // \int B^{n-2} B^{n-2}

  explicit EnergyGrams(int degree) : n(degree) {
    s0.assign(n + 1, std::vector<double>(n + 1));
    for (int a = 0; a <= n; ++a)
      for (int b = 0; b <= n; ++b)
        s0[a][b] =
            binomial(n, a) * binomial(n, b) / binomial(2 * n, a + b) / (2.0 * n + 1.0);
    g1.assign(n, std::vector<double>(n));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        g1[a][b] = binomial(n - 1, a) * binomial(n - 1, b) /
                   binomial(2 * n - 2, a + b) / (2.0 * n - 1.0);
    g2.assign(n - 1, std::vector<double>(n - 1));
    for (int a = 0; a + 1 < n; ++a)
      for (int b = 0; b + 1 < n; ++b)
        g2[a][b] = binomial(n - 2, a) * binomial(n - 2, b) /
                   binomial(2 * n - 4, a + b) / (2.0 * n - 3.0);
  }

  double g1_at(int a, int b) const {
    if (a < 0 || b < 0 || a >= n || b >= n) return 0.0;
    return g1[a][b];
  }
  double g2_at(int a, int b) const {
    if (a < 0 || b < 0 || a + 1 >= n || b + 1 >= n) return 0.0;
    return g2[a][b];
  }
  // \int (B_{i-1} - B_i)(B_{k-1} - B_k) over the degree n-1 basis.
  double d1(int i, int k) const {
    return g1_at(i - 1, k - 1) - g1_at(i - 1, k) - g1_at(i, k - 1) + g1_at(i, k);
  }
  // Same for second differences over the degree n-2 basis.
  double d2(int i, int k) const {
    static const double w[3] = {1.0, -2.0, 1.0};
    double acc = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        acc += w[a] * w[b] * g2_at(i - 2 + a, k - 2 + b);
    return acc;
  }
};

}  // namespace

EnergySystem assemble_energy_system(int n, double tau1, double tau2) {
  if (n < 4) throw std::invalid_argument("patchfit: energy system needs degree >= 4");
  EnergySystem sys;
  sys.n = n;
  sys.tau1 = tau1;
  sys.tau2 = tau2;
  const EnergyGrams g(n);
  const int nn = (n + 1) * (n + 1);
  const double n2 = static_cast<double>(n) * n;
  const double nn1 = static_cast<double>(n) * (n - 1);
  sys.h_full = Eigen::MatrixXd::Zero(nn, nn);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const int row = i * (n + 1) + j;
      for (int k = 0; k <= n; ++k) {
        for (int l = 0; l <= n; ++l) {
          const int col = k * (n + 1) + l;
          double h = 0.0;
          h += 2.0 * tau1 * n2 * (g.d1(i, k) * g.s0[j][l] + g.s0[i][k] * g.d1(j, l));
          h += 2.0 * tau2 * nn1 * nn1 *
               (g.d2(i, k) * g.s0[j][l] + g.s0[i][k] * g.d2(j, l));
          h += 4.0 * tau2 * n2 * n2 * g.d1(i, k) * g.d1(j, l);
          sys.h_full(row, col) = h;
        }
      }
    }
  }
  for (int i = 2; i <= n - 2; ++i)
    for (int j = 2; j <= n - 2; ++j) sys.interior.push_back(i * (n + 1) + j);
  const int ni = static_cast<int>(sys.interior.size());
  Eigen::MatrixXd m(ni, ni);
  for (int r = 0; r < ni; ++r)
    for (int c = 0; c < ni; ++c) m(r, c) = sys.h_full(sys.interior[r], sys.interior[c]);
  sys.llt.compute(0.5 * (m + m.transpose()));
  if (sys.llt.info() != Eigen::Success)
    throw std::runtime_error("patchfit: energy system is not positive definite");
  return sys;
}

double energy_value(const BezierPatch& patch, double tau1, double tau2) {
  const TensorPoly x = patch.coord_field(0);
  const TensorPoly y = patch.coord_field(1);
  auto sq = [](const TensorPoly& t) { return tensor_integral(tensor_product(t, t)); };
  const TensorPoly xu = tensor_derivative_u(x), yu = tensor_derivative_u(y);
  const TensorPoly xv = tensor_derivative_v(x), yv = tensor_derivative_v(y);
  double e = tau1 * (sq(xu) + sq(yu) + sq(xv) + sq(yv));
  e += tau2 * (sq(tensor_derivative_u(xu)) + sq(tensor_derivative_u(yu)) +
               2.0 * (sq(tensor_derivative_v(xu)) + sq(tensor_derivative_v(yu))) +
               sq(tensor_derivative_v(xv)) + sq(tensor_derivative_v(yv)));
  return e;
}

void solve_inner_points(BezierPatch& patch, const EnergySystem& sys) {
  if (patch.n != sys.n) throw std::invalid_argument("patchfit: degree mismatch");
  const int nn = (sys.n + 1) * (sys.n + 1);
  const int ni = static_cast<int>(sys.interior.size());
  if (ni == 0) return;
  std::vector<char> is_interior(nn, 0);
  for (int idx : sys.interior) is_interior[idx] = 1;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(ni, 2);
  for (int r = 0; r < ni; ++r) {
    const int row = sys.interior[r];
    for (int c = 0; c < nn; ++c) {
      if (is_interior[c]) continue;
      b(r, 0) -= sys.h_full(row, c) * patch.net[c].x;
      b(r, 1) -= sys.h_full(row, c) * patch.net[c].y;
    }
  }
  const Eigen::MatrixXd sol = sys.llt.solve(b);
  for (int r = 0; r < ni; ++r) patch.net[sys.interior[r]] = {sol(r, 0), sol(r, 1)};
}

// ---------------------------------------------------------------------------

LocalFitResult fit_patches(PatchLayout& layout, double tau1, double tau2) {
  LocalFitResult out;
  snap_regular_vertices(layout);
  out.patches = build_patches(layout);
  for (BezierPatch& p : out.patches) init_second_layer(p, &out.flags);
  enforce_c1(layout, out.patches);
  enforce_g1_all(layout, out.patches, out.flags);
  out.system = assemble_energy_system(layout.degree, tau1, tau2);
  for (BezierPatch& p : out.patches) solve_inner_points(p, out.system);
  return out;
}

}  // namespace bezpar

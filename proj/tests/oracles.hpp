#pragma once

// Independent reference implementations used only by tests: a de Boor
// B-spline evaluator, dense-sampling area, finite differences, and
// Gauss-Legendre quadrature. These deliberately avoid the library's own
// evaluation paths.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "bezpar/bspline.hpp"

namespace oracle {

inline bezpar::Point2 de_boor(const bezpar::BSplineCurve& c, double u) {
  const int p = c.degree;
  const std::vector<double>& t = c.knots;
  const int m = static_cast<int>(t.size()) - 1;
  double uu = std::min(std::max(u, t[p]), t[m - p]);
  int k = p;
  for (int i = p; i < m - p; ++i)
    if (t[i] <= uu && uu < t[i + 1]) k = i;
  if (uu >= t[m - p]) {
    k = m - p - 1;
    while (t[k] == t[k + 1]) --k;
  }
  std::vector<bezpar::Point2> d(p + 1);
  for (int j = 0; j <= p; ++j) d[j] = c.control_points[j + k - p];
  for (int r = 1; r <= p; ++r) {
    for (int j = p; j >= r; --j) {
      const double den = t[j + 1 + k - r] - t[j + k - p];
      const double alpha = den > 0.0 ? (uu - t[j + k - p]) / den : 0.0;
      d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
    }
  }
  return d[p];
}

// Shoelace area of a densely sampled closed loop of curves.
inline double sampled_area(const std::vector<const bezpar::BezierCurve*>& curves,
                           const std::vector<bool>& forward, int samples_per_curve) {
  std::vector<bezpar::Point2> poly;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    for (int s = 0; s < samples_per_curve; ++s) {
      const double t = static_cast<double>(s) / samples_per_curve;
      poly.push_back(curves[k]->eval(forward[k] ? t : 1.0 - t));
    }
  }
  return bezpar::polygon_signed_area(poly);
}

inline Eigen::VectorXd central_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Gauss-Legendre nodes/weights on [0,1] by Newton iteration on P_n.
struct GaussRule {
  std::vector<double> nodes, weights;
  explicit GaussRule(int n) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      nodes[i] = 0.5 * (x + 1.0);
      weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
  }
  double integrate2d(const std::function<double(double, double)>& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      for (std::size_t j = 0; j < nodes.size(); ++j)
        acc += weights[i] * weights[j] * f(nodes[i], nodes[j]);
    return acc;
  }
};

// Random clamped B-spline with p <= max_degree and at most max_spans spans.
inline bezpar::BSplineCurve random_bspline(std::mt19937_64& rng, int max_degree,
                                           int max_spans) {
  std::uniform_int_distribution<int> degree_dist(1, max_degree);
  std::uniform_int_distribution<int> span_dist(1, max_spans);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  bezpar::BSplineCurve c;
  c.degree = degree_dist(rng);
  const int spans = span_dist(rng);
  std::vector<double> interior;
  for (int s = 1; s < spans; ++s) interior.push_back(static_cast<double>(s) / spans);
  // Random interior multiplicities up to the degree.
  std::vector<double> knots(c.degree + 1, 0.0);
  for (double u : interior) {
    std::uniform_int_distribution<int> mult_dist(1, c.degree);
    const int mult = mult_dist(rng);
    for (int s = 0; s < mult; ++s) knots.push_back(u);
  }
  for (int s = 0; s <= c.degree; ++s) knots.push_back(1.0);
  c.knots = knots;
  const std::size_t ncp = knots.size() - c.degree - 1;
  for (std::size_t s = 0; s < ncp; ++s)
    c.control_points.push_back({coord(rng), coord(rng)});
  return c;
}

inline bezpar::BezierCurve random_bezier(std::mt19937_64& rng, int degree,
                                         double span = 2.0) {
  std::uniform_real_distribution<double> coord(-span, span);
  std::vector<bezpar::Point2> pts(degree + 1);
  for (auto& p : pts) p = {coord(rng), coord(rng)};
  return bezpar::BezierCurve(std::move(pts));
}

}  // namespace oracle

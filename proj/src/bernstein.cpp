#include "bezpar/bernstein.hpp"

#include <cmath>
#include <stdexcept>

namespace bezpar {

namespace {

// Pascal triangle up to kMaxBinomialOrder, built once. All entries are exact:
// the largest, C(56,28), is below 2^53.
const std::vector<std::vector<double>>& pascal_table() {
  static const std::vector<std::vector<double>> table = [] {
    std::vector<std::vector<double>> t(kMaxBinomialOrder + 1);
    for (int n = 0; n <= kMaxBinomialOrder; ++n) {
      t[n].resize(n + 1);
      t[n][0] = t[n][n] = 1.0;
      for (int k = 1; k < n; ++k) t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
    }
    return t;
  }();
  return table;
}

void check_degree(int degree, const char* what) {
  if (degree < 0) throw std::domain_error(std::string(what) + ": negative degree");
  if (degree > kMaxBinomialOrder)
    throw std::domain_error(std::string(what) + ": degree exceeds supported maximum");
}

}  // namespace

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  if (n < 0 || n > kMaxBinomialOrder)
    throw std::domain_error("binomial: order out of range");
  return pascal_table()[n][k];
}

double bernstein_eval(int i, int n, double t) {
  if (i < 0 || i > n) throw std::domain_error("bernstein_eval: index out of range");
  check_degree(n, "bernstein_eval");
  return binomial(n, i) * std::pow(t, i) * std::pow(1.0 - t, n - i);
}

Polynomial1D::Polynomial1D(std::vector<double> c) {
  if (c.empty()) throw std::domain_error("Polynomial1D: empty coefficient list");
  degree = static_cast<int>(c.size()) - 1;
  check_degree(degree, "Polynomial1D");
  for (double v : c)
    if (!std::isfinite(v)) throw std::domain_error("Polynomial1D: non-finite coefficient");
  coeffs = std::move(c);
}

double Polynomial1D::eval(double t) const {
  std::vector<double> b = coeffs;
  for (int r = 1; r <= degree; ++r)
    for (int i = 0; i <= degree - r; ++i) b[i] = (1.0 - t) * b[i] + t * b[i + 1];
  return b[0];
}

Polynomial1D poly_product(const Polynomial1D& r, const Polynomial1D& s) {
  const int l1 = r.degree;
  const int l2 = s.degree;
  check_degree(l1 + l2, "poly_product");
  std::vector<double> c(l1 + l2 + 1, 0.0);
  for (int i = 0; i <= l1 + l2; ++i) {
    const double den = binomial(l1 + l2, i);
    double acc = 0.0;
    const int lo = std::max(0, i - l2);
    const int hi = std::min(i, l1);
    for (int k = lo; k <= hi; ++k)
      acc += binomial(l1, k) * binomial(l2, i - k) * r.coeffs[k] * s.coeffs[i - k];
    c[i] = acc / den;
  }
  return Polynomial1D(std::move(c));
}

double poly_integral(const Polynomial1D& s) {
  double acc = 0.0;
  for (double v : s.coeffs) acc += v;
  return acc / (s.degree + 1);
}

Polynomial1D poly_derivative(const Polynomial1D& s) {
  const int n = s.degree;
  if (n == 0) return Polynomial1D(std::vector<double>{0.0});
  std::vector<double> c(n, 0.0);
  for (int i = 0; i < n; ++i) c[i] = n * (s.coeffs[i + 1] - s.coeffs[i]);
  return Polynomial1D(std::move(c));
}

Polynomial1D poly_elevate(const Polynomial1D& s, int target_degree) {
  if (target_degree < s.degree)
    throw std::domain_error("poly_elevate: target below current degree");
  check_degree(target_degree, "poly_elevate");
  Polynomial1D out = s;
  while (out.degree < target_degree) {
    const int n = out.degree + 1;
    std::vector<double> c(n + 1, 0.0);
    for (int i = 0; i <= n; ++i) {
      const double a = (i > 0) ? static_cast<double>(i) / n * out.coeffs[i - 1] : 0.0;
      const double b = (i < n) ? (1.0 - static_cast<double>(i) / n) * out.coeffs[i] : 0.0;
      c[i] = a + b;
    }
    out = Polynomial1D(std::move(c));
  }
  return out;
}

Polynomial1D poly_sum(const Polynomial1D& a, const Polynomial1D& b) {
  const int d = std::max(a.degree, b.degree);
  Polynomial1D ea = poly_elevate(a, d);
  Polynomial1D eb = poly_elevate(b, d);
  for (int i = 0; i <= d; ++i) ea.coeffs[i] += eb.coeffs[i];
  return ea;
}

BezierCurve::BezierCurve(std::vector<Point2> p) : pts(std::move(p)) {
  if (pts.empty()) throw std::domain_error("BezierCurve: no control points");
  if (degree() > kMaxCurveDegree)
    throw std::domain_error("BezierCurve: degree exceeds supported maximum");
  for (const Point2& q : pts)
    if (!finite(q)) throw std::domain_error("BezierCurve: non-finite control point");
}

Point2 BezierCurve::eval(double t) const {
  std::vector<Point2> b = pts;
  const int n = degree();
  for (int r = 1; r <= n; ++r)
    for (int i = 0; i <= n - r; ++i) b[i] = (1.0 - t) * b[i] + t * b[i + 1];
  return b[0];
}

Point2 BezierCurve::derivative_at(double t) const {
  return curve_derivative(*this).eval(t);
}

Polynomial1D BezierCurve::coord_poly(int axis) const {
  std::vector<double> c(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) c[i] = axis == 0 ? pts[i].x : pts[i].y;
  return Polynomial1D(std::move(c));
}

BezierCurve BezierCurve::reversed() const {
  std::vector<Point2> p(pts.rbegin(), pts.rend());
  return BezierCurve(std::move(p));
}

BezierCurve curve_degree_elevate(const BezierCurve& c, int target_degree) {
  if (target_degree < c.degree())
    throw std::domain_error("curve_degree_elevate: target below current degree");
  if (target_degree > kMaxCurveDegree)
    throw std::domain_error("curve_degree_elevate: target exceeds supported maximum");
  BezierCurve out = c;
  while (out.degree() < target_degree) {
    const int n = out.degree() + 1;
    std::vector<Point2> p(n + 1);
    p[0] = out.pts[0];
    p[n] = out.pts[n - 1];
    for (int i = 1; i < n; ++i) {
      const double a = static_cast<double>(i) / n;
      p[i] = a * out.pts[i - 1] + (1.0 - a) * out.pts[i];
    }
    out = BezierCurve(std::move(p));
  }
  return out;
}

std::pair<BezierCurve, BezierCurve> curve_split(const BezierCurve& c, double t) {
  if (!(t > 0.0 && t < 1.0)) throw std::domain_error("curve_split: t outside (0,1)");
  const int n = c.degree();
  std::vector<Point2> b = c.pts;
  std::vector<Point2> left(n + 1), right(n + 1);
  left[0] = b[0];
  right[n] = b[n];
  for (int r = 1; r <= n; ++r) {
    for (int i = 0; i <= n - r; ++i) b[i] = (1.0 - t) * b[i] + t * b[i + 1];
    left[r] = b[0];
    right[n - r] = b[n - r];
  }
  return {BezierCurve(std::move(left)), BezierCurve(std::move(right))};
}

BezierCurve curve_derivative(const BezierCurve& c) {
  const int n = c.degree();
  if (n < 1) throw std::domain_error("curve_derivative: degree 0 curve");
  std::vector<Point2> p(n);
  for (int i = 0; i < n; ++i) p[i] = static_cast<double>(n) * (c.pts[i + 1] - c.pts[i]);
  return BezierCurve(std::move(p));
}

// ---------------------------------------------------------------------------

double TensorPoly::eval(double u, double v) const {
  // Collapse u by de Casteljau on each column-slice, then collapse v.
  std::vector<double> col(dv + 1);
  std::vector<double> rows((du + 1));
  for (int j = 0; j <= dv; ++j) {
    for (int i = 0; i <= du; ++i) rows[i] = at(i, j);
    for (int r = 1; r <= du; ++r)
      for (int i = 0; i <= du - r; ++i) rows[i] = (1.0 - u) * rows[i] + u * rows[i + 1];
    col[j] = rows[0];
  }
  for (int r = 1; r <= dv; ++r)
    for (int j = 0; j <= dv - r; ++j) col[j] = (1.0 - v) * col[j] + v * col[j + 1];
  return col[0];
}

TensorPoly tensor_product(const TensorPoly& a, const TensorPoly& b) {
  TensorPoly out(a.du + b.du, a.dv + b.dv);
  for (int p = 0; p <= out.du; ++p) {
    const double denu = binomial(out.du, p);
    for (int q = 0; q <= out.dv; ++q) {
      const double denv = binomial(out.dv, q);
      double acc = 0.0;
      const int rlo = std::max(0, p - b.du), rhi = std::min(p, a.du);
      const int slo = std::max(0, q - b.dv), shi = std::min(q, a.dv);
      for (int r = rlo; r <= rhi; ++r) {
        const double wu = binomial(a.du, r) * binomial(b.du, p - r);
        for (int s = slo; s <= shi; ++s) {
          const double wv = binomial(a.dv, s) * binomial(b.dv, q - s);
          acc += wu * wv * a.at(r, s) * b.at(p - r, q - s);
        }
      }
      out.at(p, q) = acc / (denu * denv);
    }
  }
  return out;
}

TensorPoly tensor_sum(const TensorPoly& a, const TensorPoly& b, double sb) {
  if (a.du != b.du || a.dv != b.dv)
    throw std::domain_error("tensor_sum: degree mismatch");
  TensorPoly out = a;
  for (std::size_t i = 0; i < out.c.size(); ++i) out.c[i] += sb * b.c[i];
  return out;
}

TensorPoly tensor_derivative_u(const TensorPoly& a) {
  if (a.du < 1) throw std::domain_error("tensor_derivative_u: constant in u");
  TensorPoly out(a.du - 1, a.dv);
  for (int i = 0; i < a.du; ++i)
    for (int j = 0; j <= a.dv; ++j)
      out.at(i, j) = a.du * (a.at(i + 1, j) - a.at(i, j));
  return out;
}

TensorPoly tensor_derivative_v(const TensorPoly& a) {
  if (a.dv < 1) throw std::domain_error("tensor_derivative_v: constant in v");
  TensorPoly out(a.du, a.dv - 1);
  for (int i = 0; i <= a.du; ++i)
    for (int j = 0; j < a.dv; ++j)
      out.at(i, j) = a.dv * (a.at(i, j + 1) - a.at(i, j));
  return out;
}

double tensor_integral(const TensorPoly& a) {
  double acc = 0.0;
  for (double v : a.c) acc += v;
  return acc / ((a.du + 1) * (a.dv + 1));
}

}  // namespace bezpar

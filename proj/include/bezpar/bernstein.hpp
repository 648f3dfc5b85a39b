#pragma once

#include <utility>
#include <vector>

#include "bezpar/geometry.hpp"

namespace bezpar {

// Curve degrees are capped so that every binomial coefficient that shows up
// in product/integral formulas (orders up to 2*kMaxCurveDegree) is exactly
// representable in double precision.
constexpr int kMaxCurveDegree = 28;
constexpr int kMaxBinomialOrder = 2 * kMaxCurveDegree;

// Binomial coefficients with the convention C(n,k) = 0 for k < 0 or k > n,
// which lets index-ranged convolution sums run without explicit clamps.
double binomial(int n, int k);

// B_i^n(t) = C(n,i) t^i (1-t)^(n-i).
double bernstein_eval(int i, int n, double t);

// Scalar polynomial in the Bernstein basis on [0,1].
struct Polynomial1D {
  int degree = 0;
  std::vector<double> coeffs;  // size degree+1

  Polynomial1D() : coeffs(1, 0.0) {}
  explicit Polynomial1D(std::vector<double> c);

  double eval(double t) const;  // de Casteljau
};

Polynomial1D poly_product(const Polynomial1D& r, const Polynomial1D& s);
double poly_integral(const Polynomial1D& s);
Polynomial1D poly_derivative(const Polynomial1D& s);
Polynomial1D poly_elevate(const Polynomial1D& s, int target_degree);
Polynomial1D poly_sum(const Polynomial1D& a, const Polynomial1D& b);

// Planar Bezier curve of degree pts.size()-1.
struct BezierCurve {
  std::vector<Point2> pts;

  BezierCurve() = default;
  explicit BezierCurve(std::vector<Point2> p);

  int degree() const { return static_cast<int>(pts.size()) - 1; }
  Point2 eval(double t) const;  // de Casteljau
  Point2 derivative_at(double t) const;
  Polynomial1D coord_poly(int axis) const;  // axis 0 = x, 1 = y
  BezierCurve reversed() const;
};

BezierCurve curve_degree_elevate(const BezierCurve& c, int target_degree);
std::pair<BezierCurve, BezierCurve> curve_split(const BezierCurve& c, double t);
BezierCurve curve_derivative(const BezierCurve& c);

// ---------------------------------------------------------------------------
// Tensor-product Bernstein polynomials (scalar fields over [0,1]^2), used for
// patch derivative fields, Jacobians and exact energy integrals.

struct TensorPoly {
  int du = 0;
  int dv = 0;
  std::vector<double> c;  // (du+1)*(dv+1), row-major in u

  TensorPoly() : c(1, 0.0) {}
  TensorPoly(int du_, int dv_) : du(du_), dv(dv_), c((du_ + 1) * (dv_ + 1), 0.0) {}

  double& at(int i, int j) { return c[i * (dv + 1) + j]; }
  double at(int i, int j) const { return c[i * (dv + 1) + j]; }
  double eval(double u, double v) const;
};

TensorPoly tensor_product(const TensorPoly& a, const TensorPoly& b);
TensorPoly tensor_sum(const TensorPoly& a, const TensorPoly& b, double sb = 1.0);
TensorPoly tensor_derivative_u(const TensorPoly& a);
TensorPoly tensor_derivative_v(const TensorPoly& a);
double tensor_integral(const TensorPoly& a);

}  // namespace bezpar

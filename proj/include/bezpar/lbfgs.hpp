#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>

namespace bezpar {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 500;
  double grad_tolerance = 1e-6;  // on the infinity norm of the gradient
  double armijo_c1 = 1e-4;
  double step_shrink = 0.5;
  int max_line_search = 40;
};

enum class LbfgsStatus { Converged, IterationLimit, LineSearchFailed };

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  LbfgsStatus status = LbfgsStatus::Converged;
};

// Limited-memory BFGS with two-loop recursion and Armijo backtracking.
// `fg` evaluates the objective and writes the gradient. Returns the best
// iterate seen; the objective value is non-increasing across accepted steps.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, const LbfgsOptions& opt = {},
    const std::function<void(int, double, double)>& trace = nullptr) {
  using Vec = Eigen::VectorXd;
  const Eigen::Index n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  if (n == 0) return res;

  Vec g(n);
  double f = fg(res.x, g);
  res.f = f;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  if (trace) trace(0, f, res.grad_norm);

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  double h0 = 1.0;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    if (res.grad_norm <= opt.grad_tolerance) {
      res.status = LbfgsStatus::Converged;
      res.iterations = it - 1;
      return res;
    }

    // Two-loop recursion.
    Vec q = g;
    const int k = static_cast<int>(s_hist.size());
    std::vector<double> alpha(k);
    for (int i = k - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    q *= h0;
    for (int i = 0; i < k; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vec d = -q;
    double dg = d.dot(g);
    if (!(dg < 0.0)) {  // not a descent direction; reset to steepest descent
      d = -g;
      dg = -g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      h0 = 1.0;
    }

    double step = 1.0;
    Vec x_new(n), g_new(n);
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      x_new = res.x + step * d;
      f_new = fg(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= f + opt.armijo_c1 * step * dg) {
        accepted = true;
        break;
      }
      step *= opt.step_shrink;
    }
    if (!accepted) {
      res.status = LbfgsStatus::LineSearchFailed;
      res.iterations = it;
      return res;
    }

    const Vec s = x_new - res.x;
    const Vec y = g_new - g;
    const double ys = y.dot(s);
    if (ys > 1e-12 * y.norm() * s.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / ys);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      h0 = ys / y.squaredNorm();
    }

    res.x = std::move(x_new);
    f = f_new;
    g = g_new;
    res.f = f;
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    res.iterations = it;
    if (trace) trace(it, f, res.grad_norm);
  }
  res.status = LbfgsStatus::IterationLimit;
  return res;
}

}  // namespace bezpar

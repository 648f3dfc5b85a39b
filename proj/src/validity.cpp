#include "bezpar/validity.hpp"

#include <algorithm>
#include <cmath>

#include "bezpar/lbfgs.hpp"

namespace bezpar {

double JacobianField::min_coeff() const {
  return *std::min_element(coeffs.c.begin(), coeffs.c.end());
}

double JacobianField::max_coeff() const {
  return *std::max_element(coeffs.c.begin(), coeffs.c.end());
}

JacobianField jacobian_coeffs(const BezierPatch& patch) {
  const TensorPoly x = patch.coord_field(0);
  const TensorPoly y = patch.coord_field(1);
  const TensorPoly xu = tensor_derivative_u(x);
  const TensorPoly xv = tensor_derivative_v(x);
  const TensorPoly yu = tensor_derivative_u(y);
  const TensorPoly yv = tensor_derivative_v(y);
  JacobianField f;
  f.n = patch.n;
  f.coeffs = tensor_sum(tensor_product(xu, yv), tensor_product(xv, yu), -1.0);
  return f;
}

bool classify_patch(const JacobianField& f) { return f.min_coeff() > 0.0; }

namespace {

// ln with quadratic extrapolation below eps, so the barrier is defined at an
// infeasible start.
double smooth_log(double a, double eps) {
  if (a >= eps) return std::log(a);
  const double d = a - eps;
  return std::log(eps) + d / eps - d * d / (2.0 * eps * eps);
}

double smooth_log_d(double a, double eps) {
  if (a >= eps) return 1.0 / a;
  return 1.0 / eps - (a - eps) / (eps * eps);
}

}  // namespace

RepairOutcome repair_patch(BezierPatch& patch, const RepairConfig& cfg,
                           const EnergySystem& sys, const RepairTrace& trace) {
  RepairOutcome out;
  {
    const JacobianField f0 = jacobian_coeffs(patch);
    out.min_coeff_before = f0.min_coeff();
    if (classify_patch(f0)) {
      out.success = true;
      out.min_coeff_after = out.min_coeff_before;
      return out;
    }
  }
  out.attempted = true;

  const int n = patch.n;
  const int nn = (n + 1) * (n + 1);
  const std::vector<int>& interior = sys.interior;
  const int ni = static_cast<int>(interior.size());
  if (ni == 0) return out;

  // Sensitivities of the derivative fields to one interior point.
  std::vector<TensorPoly> du(ni), dv(ni);
  for (int r = 0; r < ni; ++r) {
    TensorPoly e(n, n);
    e.c[interior[r]] = 1.0;
    du[r] = tensor_derivative_u(e);
    dv[r] = tensor_derivative_v(e);
  }

  const double e_init = energy_value(patch, sys.tau1, sys.tau2);
  const int ncoef = 2 * n * 2 * n;
  const double eps = cfg.barrier_eps;

  const std::vector<Point2> net0 = patch.net;
  const Point2 centroid = [&] {
    Point2 acc{0.0, 0.0};
    int count = 0;
    std::vector<char> is_interior(nn, 0);
    for (int idx : interior) is_interior[idx] = 1;
    for (int idx = 0; idx < nn; ++idx) {
      if (is_interior[idx]) continue;
      acc += net0[idx];
      ++count;
    }
    return acc / static_cast<double>(count);
  }();

  auto apply = [&](const Eigen::VectorXd& x) {
    for (int r = 0; r < ni; ++r) patch.net[interior[r]] = {x[2 * r], x[2 * r + 1]};
  };
  auto pack = [&] {
    Eigen::VectorXd x(2 * ni);
    for (int r = 0; r < ni; ++r) {
      x[2 * r] = patch.net[interior[r]].x;
      x[2 * r + 1] = patch.net[interior[r]].y;
    }
    return x;
  };

  auto run_stages = [&](Eigen::VectorXd x) {
    double mu = cfg.mu_init_scale * std::max(e_init, 1e-12) / ncoef;
    for (int stage = 0; stage < cfg.mu_stages; ++stage) {
      auto fg = [&](const Eigen::VectorXd& xv_, Eigen::VectorXd& g) {
        apply(xv_);
        const TensorPoly xf = patch.coord_field(0);
        const TensorPoly yf = patch.coord_field(1);
        const TensorPoly xu_f = tensor_derivative_u(xf);
        const TensorPoly xv_f = tensor_derivative_v(xf);
        const TensorPoly yu_f = tensor_derivative_u(yf);
        const TensorPoly yv_f = tensor_derivative_v(yf);
        const TensorPoly jac =
            tensor_sum(tensor_product(xu_f, yv_f), tensor_product(xv_f, yu_f), -1.0);

        // Quadratic energy through the cached Hessian.
        Eigen::VectorXd px(nn), py(nn);
        for (int idx = 0; idx < nn; ++idx) {
          px[idx] = patch.net[idx].x;
          py[idx] = patch.net[idx].y;
        }
        const Eigen::VectorXd hx = sys.h_full * px;
        const Eigen::VectorXd hy = sys.h_full * py;
        double f = 0.5 * (px.dot(hx) + py.dot(hy));

        double barrier = 0.0;
        std::vector<double> w(jac.c.size());
        for (std::size_t ci = 0; ci < jac.c.size(); ++ci) {
          barrier += smooth_log(jac.c[ci], eps);
          w[ci] = smooth_log_d(jac.c[ci], eps);
        }
        f -= mu * barrier;

        g.resize(2 * ni);
        for (int r = 0; r < ni; ++r) {
          const TensorPoly dax =
              tensor_sum(tensor_product(du[r], yv_f), tensor_product(dv[r], yu_f), -1.0);
          const TensorPoly day =
              tensor_sum(tensor_product(xu_f, dv[r]), tensor_product(xv_f, du[r]), -1.0);
          double bx = 0.0, by = 0.0;
          for (std::size_t ci = 0; ci < jac.c.size(); ++ci) {
            bx += w[ci] * dax.c[ci];
            by += w[ci] * day.c[ci];
          }
          g[2 * r] = hx[interior[r]] - mu * bx;
          g[2 * r + 1] = hy[interior[r]] - mu * by;
        }
        return f;
      };

      LbfgsOptions opt;
      opt.max_iterations = cfg.inner_iteration_cap;
      opt.grad_tolerance = cfg.grad_tolerance * (1.0 + e_init);
      const int stage_id = stage;
      LbfgsResult res = lbfgs_minimize(
          fg, x, opt,
          trace ? std::function<void(int, double, double)>(
                      [&, stage_id](int it, double f, double) { trace(stage_id, it, f); })
                : std::function<void(int, double, double)>());
      x = res.x;
      mu *= cfg.mu_shrink;
    }
    apply(x);
    return jacobian_coeffs(patch).min_coeff();
  };

  double best = run_stages(pack());
  const double pull[] = {0.5, 0.9, 1.0};
  int attempt = 0;
  while (best <= 0.0 && attempt < 3) {
    patch.net = net0;
    for (int idx : interior) {
      patch.net[idx] = (1.0 - pull[attempt]) * net0[idx] + pull[attempt] * centroid;
    }
    best = run_stages(pack());
    ++attempt;
    out.restarts_used = attempt;
  }
  out.min_coeff_after = best;
  out.success = best > 0.0;
  return out;
}

}  // namespace bezpar

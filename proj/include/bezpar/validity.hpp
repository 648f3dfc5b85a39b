#pragma once

#include <functional>

#include "bezpar/patchfit.hpp"

namespace bezpar {

// Bernstein coefficients of the Jacobian x_u y_v - x_v y_u; degree 2n-1 in
// each direction. The pointwise Jacobian is sandwiched between the extreme
// coefficients.
struct JacobianField {
  int n = 0;
  TensorPoly coeffs;

  double min_coeff() const;
  double max_coeff() const;
};

JacobianField jacobian_coeffs(const BezierPatch& patch);

// Valid iff every Jacobian coefficient is strictly positive.
bool classify_patch(const JacobianField& f);

struct RepairConfig {
  double mu_init_scale = 1e-2;  // mu0 = scale * E(initial) / #coefficients
  double mu_shrink = 0.1;
  int mu_stages = 5;
  int inner_iteration_cap = 200;
  double grad_tolerance = 1e-8;
  double barrier_eps = 1e-8;  // quadratic extrapolation of ln below this
};

struct RepairOutcome {
  bool attempted = false;
  bool success = false;
  double min_coeff_before = 0.0;
  double min_coeff_after = 0.0;
  int restarts_used = 0;
};

using RepairTrace = std::function<void(int stage, int iteration, double objective)>;

// Log-barrier repositioning of the interior control points; the boundary two
// layers are never touched, so interface continuity is preserved.
RepairOutcome repair_patch(BezierPatch& patch, const RepairConfig& cfg,
                           const EnergySystem& sys, const RepairTrace& trace = nullptr);

}  // namespace bezpar

#pragma once

#include <string>
#include <vector>

#include "bezpar/patchfit.hpp"

namespace bezpar {

struct MetricTriple {
  double min = 0.0;
  double avg = 0.0;
  double max = 0.0;
};

struct PatchQuality {
  MetricTriple scaled_jacobian;
  MetricTriple condition_number;
  int degenerate_samples = 0;  // |r_u||r_v| below threshold
  int singular_samples = 0;    // J ~ 0, condition number recorded as +inf
};

struct QualityFlags {
  int invalid_patches = 0;
  int repair_failures = 0;
  int g1_fallbacks = 0;
  bool fallback_quadrangulation = false;
};

struct QualityReport {
  int patch_count = 0;
  int degree = 0;
  int control_point_count = 0;
  int grid = 0;
  PatchQuality global;  // sample-weighted across all patches
  std::vector<PatchQuality> per_patch;
  QualityFlags flags;
};

// J_s = J / (|r_u| |r_v|) on a uniform grid x grid tensor sample (boundary
// included). Degenerate samples record 0.
std::vector<double> scaled_jacobian_field(const BezierPatch& patch, int grid,
                                          int* degenerate = nullptr);

// kappa = |J|_F |J^-1|_F per sample; singular samples record +inf.
std::vector<double> condition_number_field(const BezierPatch& patch, int grid,
                                           int* singular = nullptr);

QualityReport quality_report(const std::vector<BezierPatch>& patches, int grid,
                             const QualityFlags& flags = {});

// Aligned text table, one row per patch plus a global row.
std::string report_table(const QualityReport& report);

}  // namespace bezpar

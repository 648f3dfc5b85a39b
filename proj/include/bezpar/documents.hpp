#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bezpar/quality.hpp"
#include "bezpar/validity.hpp"

namespace bezpar {

struct PipelineConfig {
  double sigma1 = 2.0;  // stretch weight in the curve shape energy
  double sigma2 = 1.0;  // strain weight
  double w1 = 2.0;      // area uniformity
  double w2 = 1.0;      // curve shape
  double w3 = 50.0;     // tangent constraints
  double tau1 = 2.0;    // patch stretch
  double tau2 = 1.5;    // patch bending
  double epsilon = 0.1;  // non-concavity tolerance of the decomposition
  double delta = 1e-3;   // smoothing termination ratio
  int min_degree = 4;
  int grid = 30;
  int lbfgs_memory = 10;
  double grad_tolerance = 1e-6;
  int max_iterations = 500;
  int smooth_cap = 1000;
  int validity_restarts = 2;
  RepairConfig repair;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string config_hash(const PipelineConfig& cfg);

struct StageTimings {
  double t1_global = 0.0;  // segmentation-curve optimization
  double t2_local = 0.0;   // patch construction, continuity, repair
  double total = 0.0;
};

struct PipelineFlags {
  int validity_violations = 0;
  int validity_restarts_used = 0;
  int invalid_patches = 0;
  int repair_failures = 0;
  int g1_fallbacks = 0;
  int irregular_vertices = 0;
  bool fallback_quadrangulation = false;
  int parity_segment_splits = 0;
  int parity_cut_splits = 0;
  int orth_newton_failures = 0;
  std::vector<std::string> warnings;
};

// Umbrella document passed between pipeline stages; sections are filled as
// stages run so any stage output can be saved and inspected.
struct LayoutDocument {
  int version = 1;
  PipelineConfig config;
  int degree = 0;
  std::vector<SegmentChain> chains;
  bool has_mesh = false;
  QuadMesh mesh;
  bool has_curves = false;
  PatchLayout layout;
  std::vector<BezierPatch> patches;
  bool has_report = false;
  QualityReport report;
  PipelineFlags flags;
  StageTimings timings;
};

std::vector<BoundaryLoop> parse_boundary(const std::string& text);
std::vector<BoundaryLoop> load_boundary(const std::string& path);

PipelineConfig parse_config(const std::string& text,
                            std::vector<std::string>* warnings = nullptr);
PipelineConfig load_config(const std::string& path,
                           std::vector<std::string>* warnings = nullptr);

std::string serialize_layout(const LayoutDocument& doc);
LayoutDocument parse_layout(const std::string& text,
                            std::vector<std::string>* warnings = nullptr);
void save_layout(const LayoutDocument& doc, const std::string& path);
LayoutDocument load_layout(const std::string& path,
                           std::vector<std::string>* warnings = nullptr);

}  // namespace bezpar

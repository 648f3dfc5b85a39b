#include "bezpar/pipeline.hpp"

#include <chrono>
#include <stdexcept>

namespace bezpar {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void stage_preprocess(LayoutDocument& doc, const std::vector<BoundaryLoop>& loops) {
  doc.config.validate();
  PreprocessOptions opt;
  opt.min_degree = doc.config.min_degree;
  PreprocessResult res = preprocess_boundary(loops, opt);
  doc.chains = std::move(res.chains);
  doc.degree = res.degree;
}

void stage_mesh(LayoutDocument& doc) {
  if (doc.chains.empty()) throw std::runtime_error("pipeline: mesh stage needs chains");
  TopologyResult topo = build_topology(doc.chains, doc.config.epsilon,
                                       doc.config.delta, doc.config.smooth_cap);
  doc.chains = std::move(topo.chains);
  doc.mesh = std::move(topo.mesh);
  doc.has_mesh = true;
  doc.flags.fallback_quadrangulation = topo.flags.fallback_quadrangulation;
  doc.flags.parity_segment_splits = topo.flags.parity_segment_splits;
  doc.flags.parity_cut_splits = topo.flags.parity_cut_splits;
  if (topo.flags.fallback_quadrangulation)
    doc.flags.warnings.push_back(
        "quadrangulation fell back to triangulate-and-split; valences unrestricted");
}

void stage_segment(LayoutDocument& doc, const OptimizerTrace& trace) {
  if (!doc.has_mesh) throw std::runtime_error("pipeline: segment stage needs a mesh");
  const auto t0 = std::chrono::steady_clock::now();

  doc.layout = init_segmentation_curves(doc.mesh, doc.chains, doc.degree);
  GlobalObjectiveConfig gcfg;
  gcfg.sigma1 = doc.config.sigma1;
  gcfg.sigma2 = doc.config.sigma2;
  gcfg.w1 = doc.config.w1;
  gcfg.w2 = doc.config.w2;
  gcfg.w3 = doc.config.w3;
  gcfg.lbfgs_memory = doc.config.lbfgs_memory;
  gcfg.grad_tolerance = doc.config.grad_tolerance;
  gcfg.max_iterations = doc.config.max_iterations;

  OptimizeReport rep = optimize_segmentation(doc.layout, gcfg, nullptr, trace);
  if (rep.line_search_failed)
    doc.flags.warnings.push_back("segmentation line search failed; kept best iterate");

  // Validity check with penalty restarts: double the shape weight on curves
  // whose control triangles collide and re-run.
  ValidityReport vr = check_layout_validity(doc.layout);
  std::vector<double> scale(doc.layout.curves.size(), 1.0);
  int restarts = 0;
  while (!vr.valid() && restarts < doc.config.validity_restarts) {
    for (const TrianglePairHit& hit : vr.violations) {
      if (!doc.layout.curves[hit.curve_a].fixed) scale[hit.curve_a] *= 2.0;
      if (!doc.layout.curves[hit.curve_b].fixed) scale[hit.curve_b] *= 2.0;
    }
    optimize_segmentation(doc.layout, gcfg, &scale, trace);
    vr = check_layout_validity(doc.layout);
    ++restarts;
  }
  doc.flags.validity_violations = static_cast<int>(vr.violations.size());
  doc.flags.validity_restarts_used = restarts;
  if (!vr.valid())
    doc.flags.warnings.push_back("segmentation curves still violate the control-"
                                 "triangle condition after restarts");
  doc.has_curves = true;
  doc.timings.t1_global += seconds_since(t0);
}

void stage_fit(LayoutDocument& doc) {
  if (!doc.has_curves) throw std::runtime_error("pipeline: fit stage needs curves");
  const auto t0 = std::chrono::steady_clock::now();
  LocalFitResult fit = fit_patches(doc.layout, doc.config.tau1, doc.config.tau2);
  doc.patches = std::move(fit.patches);
  doc.flags.g1_fallbacks = fit.flags.g1_fallbacks;
  doc.flags.irregular_vertices = fit.flags.irregular_vertices;
  doc.flags.orth_newton_failures = fit.flags.orth_newton_failures;
  doc.timings.t2_local += seconds_since(t0);
}

void stage_check(LayoutDocument& doc) {
  if (doc.patches.empty()) throw std::runtime_error("pipeline: check stage needs patches");
  const auto t0 = std::chrono::steady_clock::now();
  const EnergySystem sys =
      assemble_energy_system(doc.degree, doc.config.tau1, doc.config.tau2);
  doc.flags.invalid_patches = 0;
  doc.flags.repair_failures = 0;
  for (std::size_t p = 0; p < doc.patches.size(); ++p) {
    const JacobianField f = jacobian_coeffs(doc.patches[p]);
    if (classify_patch(f)) continue;
    ++doc.flags.invalid_patches;
    const RepairOutcome outcome = repair_patch(doc.patches[p], doc.config.repair, sys);
    if (!outcome.success) {
      ++doc.flags.repair_failures;
      doc.flags.warnings.push_back("patch " + std::to_string(p) +
                                   " is invalid and repair failed");
    }
  }
  doc.timings.t2_local += seconds_since(t0);
}

void stage_report(LayoutDocument& doc) {
  if (doc.patches.empty())
    throw std::runtime_error("pipeline: report stage needs patches");
  QualityFlags qf;
  qf.invalid_patches = doc.flags.invalid_patches;
  qf.repair_failures = doc.flags.repair_failures;
  qf.g1_fallbacks = doc.flags.g1_fallbacks;
  qf.fallback_quadrangulation = doc.flags.fallback_quadrangulation;
  doc.report = quality_report(doc.patches, doc.config.grid, qf);
  doc.has_report = true;
}

LayoutDocument run_pipeline(const std::vector<BoundaryLoop>& loops,
                            const PipelineConfig& cfg, const OptimizerTrace& trace) {
  const auto t0 = std::chrono::steady_clock::now();
  LayoutDocument doc;
  doc.config = cfg;
  stage_preprocess(doc, loops);
  stage_mesh(doc);
  stage_segment(doc, trace);
  stage_fit(doc);
  stage_check(doc);
  stage_report(doc);
  doc.timings.total = seconds_since(t0);
  return doc;
}

}  // namespace bezpar

#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <vector>

#include "bezpar/topology.hpp"

namespace bezpar {

struct SegmentationCurve {
  BezierCurve curve;
  int v_start = -1;
  int v_end = -1;
  bool fixed = false;  // boundary and bridge curves are never optimized
  EdgeSource source;   // provenance for boundary curves
};

// One entry of the curve fan around a mesh vertex, in CCW order.
struct StarEntry {
  int curve = -1;
  bool at_start = true;  // vertex is curve(0) rather than curve(1)
};

struct VertexStar {
  int vertex = -1;
  bool interior = false;
  std::vector<StarEntry> entries;            // CCW
  std::vector<int> wedge_quads;              // quad between entry i and i+1
};

struct PatchLayout {
  QuadMesh mesh;
  int degree = 0;
  std::vector<SegmentationCurve> curves;
  std::map<std::pair<int, int>, int> edge_curve;         // (min,max) vid -> curve
  std::vector<std::array<int, 4>> quad_curves;           // per quad side k: edge v_k->v_{k+1}
  std::vector<std::array<bool, 4>> quad_curve_forward;   // curve direction == side direction
  std::vector<VertexStar> stars;                         // one per mesh vertex

  const SegmentationCurve& side_curve(int quad, int side) const {
    return curves[quad_curves[quad][side]];
  }
};

struct GlobalObjectiveConfig {
  double sigma1 = 2.0;
  double sigma2 = 1.0;
  double w1 = 2.0;
  double w2 = 1.0;
  double w3 = 50.0;
  int lbfgs_memory = 10;
  double grad_tolerance = 1e-6;  // scaled by (1 + |F0|)
  int max_iterations = 500;
};

// Straight-edge initial layout: interior edges get equally spaced control
// points; boundary edges bind their source Bezier segments.
PatchLayout init_segmentation_curves(const QuadMesh& mesh,
                                     const std::vector<SegmentChain>& chains,
                                     int degree);

// Derived structure (edge table, per-quad curve loops, vertex stars) from an
// existing curve list; used when a layout is deserialized.
PatchLayout assemble_layout(const QuadMesh& mesh, int degree,
                            std::vector<SegmentationCurve> curves);

// Signed area of the region enclosed by a closed CCW loop of Bezier curves.
// `forward[k]` tells whether curve k is traversed in its own direction.
double region_area(const std::vector<const BezierCurve*>& curves,
                   const std::vector<bool>& forward);

double quad_area(const PatchLayout& layout, int quad);

double f_uniform(const PatchLayout& layout);
double f_shape(const PatchLayout& layout, double sigma1, double sigma2);
double f_tangent(const PatchLayout& layout);

struct OptimizeReport {
  double f_initial = 0.0;
  double f_final = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

using OptimizerTrace = std::function<void(int iteration, double f, double grad_norm)>;

// Minimizes w1*F_uniform + w2*F_shape + w3*F_tangent over the interior control
// points of interior curves; endpoints and boundary curves stay fixed.
// `shape_scale` optionally multiplies the shape weight per curve (penalty
// restarts on validity violations).
OptimizeReport optimize_segmentation(PatchLayout& layout,
                                     const GlobalObjectiveConfig& cfg,
                                     const std::vector<double>* shape_scale = nullptr,
                                     const OptimizerTrace& trace = nullptr);

struct TrianglePairHit {
  int curve_a = -1;
  int tri_a = -1;
  int curve_b = -1;
  int tri_b = -1;
};

struct ValidityReport {
  std::vector<TrianglePairHit> violations;
  bool valid() const { return violations.empty(); }
};

// Control-triangle disjointness check between each interior curve and the
// curves sharing a quad with it; triangles touching only at a shared curve
// endpoint do not count.
ValidityReport check_layout_validity(const PatchLayout& layout);

// Analytic gradient of the combined objective with respect to the flattened
// design vector; exposed for finite-difference verification.
struct SegmentationObjective {
  explicit SegmentationObjective(const PatchLayout& layout,
                                 const GlobalObjectiveConfig& cfg,
                                 const std::vector<double>* shape_scale = nullptr);
  ~SegmentationObjective();
  SegmentationObjective(const SegmentationObjective&) = delete;
  SegmentationObjective& operator=(const SegmentationObjective&) = delete;

  int dimension() const;
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& x, PatchLayout& layout) const;
  double value(const Eigen::VectorXd& x) const;
  double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const;
  // Individual terms (unweighted), for per-term gradient checks.
  double term_uniform(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;
  double term_shape(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;
  double term_tangent(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;

  struct Impl;
  Impl* impl;
};

}  // namespace bezpar

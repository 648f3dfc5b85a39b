#pragma once

#include <string>
#include <vector>

#include "bezpar/bernstein.hpp"

namespace bezpar {

// Clamped planar B-spline curve.
struct BSplineCurve {
  int degree = 0;
  std::vector<double> knots;
  std::vector<Point2> control_points;

  // Throws std::invalid_argument with a diagnostic on any structural defect
  // (knot count, clamping, interior multiplicity, monotonicity).
  void validate() const;
};

struct BoundaryLoop {
  std::vector<BSplineCurve> pieces;
  bool is_hole = false;  // outer loops run CCW, holes CW after normalization
};

// Provenance of one Bezier segment of a chain.
struct SegmentOrigin {
  int piece = -1;       // index into the source loop's piece list
  int span = -1;        // knot span within the piece
  int split_depth = 0;  // number of t=0.5 subdivisions applied
};

// Closed chain of Bezier segments of one common degree, one per loop.
struct SegmentChain {
  int loop = -1;
  bool is_hole = false;
  int degree = 0;
  std::vector<BezierCurve> segments;
  std::vector<SegmentOrigin> origins;
};

struct PreprocessStats {
  double l_ave = 0.0;
  int l_ave_compute_count = 0;
  int total_splits = 0;
  int max_split_depth = 0;
};

struct PreprocessResult {
  std::vector<SegmentChain> chains;
  int degree = 0;
  PreprocessStats stats;
};

// One Bezier segment per nonzero knot span, via repeated Boehm insertion.
std::vector<BezierCurve> bezier_extract(const BSplineCurve& c);

// Upper bound on the max distance between the curve and the straight line
// through its endpoints, from control-point distances (hull bound).
double chord_deviation(const BezierCurve& c);

// Number of midpoint subdivisions sufficient to drive the deviation bound
// below l_ave.
int subdivision_depth(const BezierCurve& c, double l_ave);

struct PreprocessOptions {
  int min_degree = 4;
  int max_split_depth = 32;
};

PreprocessResult preprocess_boundary(const std::vector<BoundaryLoop>& loops,
                                     const PreprocessOptions& opt = {});

}  // namespace bezpar

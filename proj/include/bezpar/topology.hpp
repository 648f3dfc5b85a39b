#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "bezpar/bspline.hpp"

namespace bezpar {

// Source of a discrete-boundary edge; chain < 0 marks a synthetic bridge
// edge introduced by hole conversion.
struct EdgeSource {
  int chain = -1;
  int segment = -1;
  bool is_bridge() const { return chain < 0; }
};

// Polygonal boundary made of Bezier-segment endpoints. Vertex ids are stable
// (append-only); loop 0 is the outer loop.
struct DiscreteBoundary {
  std::vector<Point2> positions;
  std::vector<std::vector<int>> loops;
  std::map<std::pair<int, int>, EdgeSource> edge_source;  // directed, loop order

  int add_vertex(const Point2& p) {
    positions.push_back(p);
    return static_cast<int>(positions.size()) - 1;
  }
  int hole_count() const { return static_cast<int>(loops.size()) - 1; }
};

struct QuasiConvexPiece {
  std::vector<int> polygon;  // vertex ids, CCW
  std::vector<double> concavity;
};

struct QuadMesh {
  std::vector<Point2> positions;
  std::vector<char> boundary_vertex;
  std::vector<std::array<int, 4>> quads;  // CCW
  std::map<std::pair<int, int>, EdgeSource> boundary_edges;  // key (min,max)

  bool is_boundary_edge(int a, int b) const {
    return boundary_edges.count({std::min(a, b), std::max(a, b)}) > 0;
  }
  // Undirected edge -> adjacent quad indices.
  std::map<std::pair<int, int>, std::vector<int>> edge_quads() const;
  std::vector<int> vertex_valences() const;
  std::vector<std::vector<int>> vertex_neighbors() const;
};

struct SmoothResult {
  QuadMesh mesh;
  int iterations = 0;
  double final_ratio = 0.0;
  bool converged = false;
};

struct TopologyFlags {
  bool fallback_quadrangulation = false;
  int parity_segment_splits = 0;
  int parity_cut_splits = 0;
};

struct TopologyResult {
  QuadMesh mesh;
  std::vector<SegmentChain> chains;  // refined when parity repair split segments
  DiscreteBoundary boundary;
  TopologyFlags flags;
};

DiscreteBoundary build_discrete_boundary(const std::vector<SegmentChain>& chains);

// Convert a multiply-connected boundary into a single loop by nearest-pair
// bridges; bridge vertices appear twice (once per traversal direction) and
// stay distinct so the slit sides remain separate boundary edges.
DiscreteBoundary bridge_holes(const DiscreteBoundary& b);

std::vector<QuasiConvexPiece> approx_convex_decompose(const DiscreteBoundary& b,
                                                      double epsilon);

// All-quad mesh conforming to the discrete boundary. Parity repair may split
// boundary Bezier segments, which is propagated into `b` and `chains`.
QuadMesh quadrangulate(std::vector<QuasiConvexPiece> pieces, DiscreteBoundary& b,
                       std::vector<SegmentChain>& chains, TopologyFlags& flags);

SmoothResult laplacian_smooth(const QuadMesh& m, double delta, int max_iterations = 1000);

// Full topology stage: discrete boundary, bridging, decomposition,
// quadrangulation, smoothing.
TopologyResult build_topology(std::vector<SegmentChain> chains, double epsilon,
                              double delta, int smooth_cap = 1000);

std::string quadmesh_to_obj(const QuadMesh& m);

// Exposed for tests: triangulate-then-midpoint-split fallback mesher.
namespace detail {
struct PieceMeshView {
  std::vector<Point2>* positions;
  std::vector<std::array<int, 4>>* quads;
};
void mesh_piece_fallback(const std::vector<int>& polygon, PieceMeshView view,
                         std::map<std::pair<int, int>, int>& edge_midpoints);
}  // namespace detail

}  // namespace bezpar

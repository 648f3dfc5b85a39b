#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "bezpar/segmentation.hpp"

namespace bezpar {

// Tensor-product patch over one quad. P_{i,j} lives at net[i*(n+1)+j]; the u
// axis runs along quad side 0 (corner 0 -> 1), the v axis along side 3
// reversed (corner 0 -> 3).
struct BezierPatch {
  int n = 0;
  int quad = -1;
  std::vector<Point2> net;

  BezierPatch() = default;
  BezierPatch(int degree, int quad_idx)
      : n(degree), quad(quad_idx), net((degree + 1) * (degree + 1)) {}

  Point2& at(int i, int j) { return net[i * (n + 1) + j]; }
  const Point2& at(int i, int j) const { return net[i * (n + 1) + j]; }

  Point2 eval(double u, double v) const;
  Vec2 deriv_u(double u, double v) const;
  Vec2 deriv_v(double u, double v) const;
  TensorPoly coord_field(int axis) const;
};

// Net coordinates of side traversal: side k runs from quad corner k to k+1.
std::array<int, 2> side_boundary_index(int n, int side, int k);
std::array<int, 2> side_flank_index(int n, int side, int k);
// Corner-adjacent interior point ((1,1)-type) at quad corner c.
std::array<int, 2> corner_adjacent_index(int n, int corner);

// Cached scalar stationarity system of the patch energy for one degree and
// weight pair; shared by every patch (and by both coordinates).
struct EnergySystem {
  int n = 0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  Eigen::MatrixXd h_full;      // (n+1)^2 x (n+1)^2 energy Hessian
  std::vector<int> interior;   // flattened interior indices (2..n-2 squared)
  Eigen::LLT<Eigen::MatrixXd> llt;
};

EnergySystem assemble_energy_system(int n, double tau1, double tau2);

// Exact value of the bending/stretch functional via Bernstein products.
double energy_value(const BezierPatch& patch, double tau1, double tau2);

// Interior points minimizing the energy with the two boundary layers fixed.
void solve_inner_points(BezierPatch& patch, const EnergySystem& sys);

struct IrregularStar {
  int vertex = -1;
  Point2 center;
  int m = 0;
  std::vector<StarEntry> curves;           // CCW
  std::vector<int> sector_patch;           // patch index per sector
  std::vector<double> alpha, beta;
  double det = 0.0;
  bool fallback = false;
};

struct PatchFitFlags {
  int g1_fallbacks = 0;
  int orth_newton_failures = 0;
  int irregular_vertices = 0;
};

// Boundary rows/columns copied from the segmentation curves; interior seeded
// by a transfinite (Coons) net.
std::vector<BezierPatch> build_patches(const PatchLayout& layout);

// Minimal adjustment of the first interior control points so that opposite
// curves join C1 at every regular interior vertex; makes the corner-point
// systems of enforce_c1 consistent. Runs before patch construction.
void snap_regular_vertices(PatchLayout& layout);

// Offset-rule initialization of the four second-layer rows followed by a few
// Newton steps on the boundary orthogonality functional per side.
void init_second_layer(BezierPatch& patch, PatchFitFlags* flags = nullptr);

// C1 conditions across regular-region interfaces: pairwise minimal-change
// projection for the side-interior flank points, cyclic/chain minimal-change
// solves for the corner-adjacent points.
void enforce_c1(const PatchLayout& layout, std::vector<BezierPatch>& patches);

IrregularStar build_irregular_star(const PatchLayout& layout, int vertex);

// Solves the sector 2x2 systems and the cyclic M x M system for the inner
// points around one irregular vertex; writes them into the patches.
void enforce_g1(IrregularStar& star, const PatchLayout& layout,
                std::vector<BezierPatch>& patches);

void enforce_g1_all(const PatchLayout& layout, std::vector<BezierPatch>& patches,
                    PatchFitFlags& flags);

// Max violation of 2 s_j = P_j + Q_j over all enforceable flank indices of
// interior curves (ends owned by irregular vertices are excluded; those are
// governed by the G1 conditions).
double c1_residual(const PatchLayout& layout, const std::vector<BezierPatch>& patches);

// Max residual of the irregular-vertex first-derivative conditions.
double g1_residual(const PatchLayout& layout, const std::vector<BezierPatch>& patches);

struct LocalFitResult {
  std::vector<BezierPatch> patches;
  EnergySystem system;
  PatchFitFlags flags;
};

// Full local stage: vertex snap, patch construction, second layer, C1, G1,
// interior energy solve.
LocalFitResult fit_patches(PatchLayout& layout, double tau1, double tau2);

}  // namespace bezpar

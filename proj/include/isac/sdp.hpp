#pragma once
// Specialized log-barrier solver for the pilot-design subproblems:
//   maximize    lambda
//   subject to  C + T(sum_p V_p) - lambda I  >= 0      (LMI, k x k)
//               tr(V_p) <= trace_bound                  (per variable)
//               tr(D_p V_p) <= rank_c_p                 (optional, per variable)
//               V_p >= 0                                (Hermitian, n_t x n_t)
// with T(W)_ij = Re tr(G_ij W) affine in W. Hermitian variables are embedded
// in real coordinates [diag; Re upper; Im upper]; the Newton system exploits
// the closed-form inverse of the -logdet metric plus a low-rank correction
// for the LMI and scalar barriers, so one step costs O(n_t^3 + q^3), q =
// k(k+1)/2.

#include <vector>

#include "isac/common.hpp"

namespace isac {

// --- Real embedding of Hermitian matrices ------------------------------
// Coordinate order: n diagonal entries, then (Re, Im) per upper pair (i, j),
// i < j, pairs enumerated j-major ((0,1), (0,2), (1,2), ...).
inline int herm_coord_count(int n) { return n * n; }
RVec herm_coords(const CMat& v);
CMat herm_from_coords(const RVec& x, int n);
// Gradient reads tr(S E_u) per basis element: equals coords scaled by
// [1 on diagonals, 2 on off-diagonal coordinates].
RVec herm_read(const CMat& s);

// Index of the (i, j) pair, i <= j, in the packed upper-triangle order used
// for the LMI gain matrices.
inline int upper_pair_index(int i, int j, int k) {
  return i * k - i * (i - 1) / 2 + (j - i);
}

struct ConvexSubproblem {
  int n_t = 0;          // Hermitian variable dimension
  int p2 = 1;           // number of V_p variables
  int k = 0;            // LMI dimension
  RMat c_eff;           // k x k constant term (symmetric)
  // k(k+1)/2 Hermitian n_t x n_t gain matrices, packed upper-triangle order;
  // entry (i, j) of the LMI is c_eff(i,j) + tr(gain[pair] * W).real().
  std::vector<CMat> gain;
  double trace_bound = 1.0;
  // Linearized rank constraints tr(rank_d[p] V_p) <= rank_c(p); empty for
  // the relaxation without rank control.
  std::vector<CMat> rank_d;
  RVec rank_c;

  void validate() const;
  RMat efim(const std::vector<CMat>& v_mats) const;
};

struct SubproblemSolution {
  std::vector<CMat> v_mats;
  double lambda = 0.0;
  double gap = 0.0;  // certified suboptimality bound, in lambda units
  int newton_steps = 0;
};

// Solves to relative duality gap <= tol, measured against the internal
// normalization of the problem (the Frobenius scale of c_eff); the returned
// gap is converted back to absolute lambda units. `warm` must be strictly
// feasible when given; without it a scaled identity start is tried, which
// requires the rank rows (if any) to accept it.
SubproblemSolution solve_subproblem(const ConvexSubproblem& sub, double tol,
                                    const std::vector<CMat>* warm = nullptr);

}  // namespace isac

#pragma once
// Stage-two downlink pilot design. Maximizes the smallest EFIM eigenvalue
// over pilot covariances under per-pilot power budgets, drives the solution
// toward rank one with a smooth log-det rank surrogate (majorize-minimize on
// its linearization), and projects to pilot vectors at full power. An SDR
// baseline (no rank control, single solve) shares the machinery.

#include <vector>

#include "isac/fim.hpp"
#include "isac/sdp.hpp"

namespace isac {

// Smooth stand-in for rank(V): [n log(1/eps) + log det(V + eps I)] divided by
// log(1 + 1/eps). Exactly 0 at V = 0, approaches the rank from below as
// eps -> 0, concave in V.
double rank_surrogate(const CMat& v, double eps);

struct PilotCovariances {
  std::vector<CMat> v_mats;  // one Hermitian PSD matrix per stage-two pilot
  double power_budget = 1.0;
  double epsilon = 1e-3;

  void validate() const;  // PSD (to rounding), traces within budget
};

struct PilotOptConfig {
  int p2 = 1;              // number of stage-two downlink pilots
  double power = 1.0;      // per-pilot power budget
  double epsilon = 1e-3;   // rank-surrogate sharpness
  int i_max = 15;          // majorize-minimize iteration cap
  double tol = 1e-3;       // relative EFIM-change stopping threshold
  double subproblem_tol = 1e-6;  // inner solver duality-gap target
  bool continuation = false;     // anneal epsilon 1e-1 -> 1e-4 over iterations
  double noise_var_r = 1.0;
  double noise_var_c = 1.0;

  void validate() const;
};

struct PilotOptTraceRow {
  int iter = 0;
  double lambda = 0.0;      // subproblem objective after this iteration
  double lmi_margin = 0.0;  // lambda_min(EFIM at iterate) - lambda
  double max_trace = 0.0;   // largest normalized covariance trace
};

struct PilotOptResult {
  CMat vectors;  // M x P2 pilot vectors, each with squared norm = power
  PilotCovariances covariances;      // relaxed optimum, physical scale
  std::vector<double> lambda_trace;  // per-iteration objective values
  double lambda_relaxed = 0.0;       // objective before rank-1 projection
  double lambda_projected = 0.0;     // smallest EFIM eigenvalue afterwards
  int iterations = 0;
  bool converged = false;
  std::vector<PilotOptTraceRow> trace;
};

// Assembles the max-min-eigenvalue subproblem over normalized covariances
// (variables are V / power, so the trace bound is 1 and the gain matrices
// absorb the budget). `lin_point` supplies the normalized covariances to
// linearize the rank surrogate around; pass nullptr for the relaxation with
// no rank rows.
ConvexSubproblem build_subproblem(const AoaPartition& partition,
                                  const PilotSet& stage1_pilots,
                                  const PilotOptConfig& cfg,
                                  const std::vector<CMat>* lin_point,
                                  double eps);

// Majorize-minimize loop: repeatedly solves the subproblem linearized at the
// current iterate (warm-started from it), stops when the EFIM settles or the
// iteration cap is hit, then projects each covariance onto its dominant
// eigenvector at full power. The per-iteration objective sequence is
// non-decreasing up to solver tolerance when `continuation` is off.
PilotOptResult optimize_pilots(const AoaPartition& partition,
                               const PilotSet& stage1_pilots,
                               const PilotOptConfig& cfg);

// Relaxation-only baseline: one solve without rank rows, then the same
// projection. The relaxed objective upper-bounds the rank-constrained one.
PilotOptResult sdr_baseline(const AoaPartition& partition,
                            const PilotSet& stage1_pilots,
                            const PilotOptConfig& cfg);

}  // namespace isac

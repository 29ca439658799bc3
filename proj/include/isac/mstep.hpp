#pragma once
// Inference M step: likelihood surrogate over the grid angles, its analytic
// gradient, Armijo-backtracked ascent with a grid-collision step cap, and the
// outer driver alternating E and M steps on a dynamic grid.

#include <vector>

#include "isac/estep.hpp"

namespace isac {

struct ArmijoParams {
  double c1 = 1e-4;
  double beta = 0.5;
  int max_backtracks = 30;
};

struct MstepConfig {
  int i_out = 15;          // max outer iterations
  ArmijoParams armijo;
  double grid_tol = 1e-4;  // stop when ||theta_next - theta|| <= grid_tol
  double step_init = 0.1;  // initial ascent step (further capped per iter)
  // Optional work-saver: only move grid indices whose support posterior
  // (max of the two modalities) exceeds the floor. Off by default.
  bool restrict_updates = false;
  double support_floor = 0.1;

  void validate() const;
};

// Q(theta) = -sum_blocks [ ||y - F(theta) x||^2 + sum_m v_m ||f_m(theta)||^2 ]
//            / noise_var,   up to an additive constant (dropped).
// x, v are the E-step posterior belief at the current grid.
double surrogate_q(const AngularGrid& grid, const GaussianBelief& belief,
                   const PilotSet& pilots, Stage stage, const Observation& obs);

// Analytic gradient of surrogate_q in every grid angle; matches central
// finite differences.
RVec gradient_q(const AngularGrid& grid, const GaussianBelief& belief,
                const PilotSet& pilots, Stage stage, const Observation& obs);

// One ascent step along `gradient` with Armijo backtracking. The step is
// capped so no angle moves more than half the minimal grid spacing (keeps a
// sorted grid sorted). Returns the grid unchanged if the line search fails.
AngularGrid mstep_update(const AngularGrid& grid, const RVec& gradient,
                         const GaussianBelief& belief, const PilotSet& pilots,
                         Stage stage, const Observation& obs,
                         const MstepConfig& config);

struct MstepTraceRow {
  int outer_iter = 0;
  double q_value = 0.0;
  double grid_max_change = 0.0;
};

struct TurboResult {
  AngularGrid grid;
  GaussianBelief belief;
  SupportPosterior support;
  int outer_iterations = 0;
  bool converged = false;
};

// Full alternation: E step at the current grid, gradient ascent on the grid,
// stop when the grid settles or i_out is reached, then one final E step at
// the settled grid so belief/support match the returned angles.
TurboResult run_turbo_sbi(const PilotSet& pilots, Stage stage,
                          const Observation& obs, const HmmParams& params,
                          const EstepConfig& ecfg, const MstepConfig& mcfg,
                          std::vector<MstepTraceRow>* trace = nullptr);

}  // namespace isac

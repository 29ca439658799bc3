#pragma once
// Downlink/uplink pilot bookkeeping and the stacked linear observation model
//   y_r = F_r(theta) x_r + n_r,  F_r = V Arad(theta),  V = [v_p^T (x) I_M]_p
//   y_c = F_c(theta) x_c + n_c,  F_c = U A(theta),     U = [u_q I_M]_q
// with x_r / x_c the angular-domain coefficients on a shared grid.

#include "isac/array.hpp"
#include "isac/rng.hpp"
#include "isac/scene.hpp"

namespace isac {

enum class Stage { One, Two, Both };

struct PilotSet {
  CMat dp1;  // M x P1 downlink pilots of stage one (columns)
  CMat dp2;  // M x P2 downlink pilots of stage two (columns; may be empty)
  CVec up;   // Q unit-modulus uplink pilot symbols
  double power_budget = 1.0;

  int m() const { return static_cast<int>(dp1.rows()); }
  int p1() const { return static_cast<int>(dp1.cols()); }
  int p2() const { return static_cast<int>(dp2.cols()); }
  int q() const { return static_cast<int>(up.size()); }

  // Downlink pilot columns active in a stage (stage two alone is used when
  // observing only the new symbols of an ongoing trial).
  CMat dps(Stage stage) const;

  void validate() const;
};

// Stage-one downlink pilots: columns of a random unitary matrix scaled to the
// power budget (omnidirectional in the sense of no preferred direction).
CMat make_omni_dps(int m, int p, double power_budget, Rng& rng);

// Unit-modulus uplink pilots with uniform random phases.
CVec make_unit_modulus_ups(int q, Rng& rng);

struct MeasurementOperator {
  int m = 0, p = 0, q = 0;
  CMat f_r;    // PM x M   (may have zero rows)
  CMat f_c;    // QM x M
  CMat v_mat;  // PM x M^2 stacked v_p^T (x) I_M
  CMat u_mat;  // QM x M   stacked u_q I_M

  int rows() const { return p * m + q * m; }
};

MeasurementOperator build_operator(const PilotSet& pilots,
                                   const AngularGrid& grid, Stage stage);

struct Observation {
  CVec y_r;  // PM
  CVec y_c;  // QM
  double noise_var_r = 1.0;
  double noise_var_c = 1.0;
};

// Noisy observation of a scene through the stage's pilots. Noise is
// circularly-symmetric CN(0, var) per entry (var/2 per real component).
Observation observe(const SceneTruth& scene, const PilotSet& pilots,
                    Stage stage, double noise_var_r, double noise_var_c,
                    Rng& rng);

// Concatenates stage-one and stage-two radar observations (comm rows are
// taken from `first`; uplink pilots are transmitted once).
Observation stack_observations(const Observation& first,
                               const Observation& second);

}  // namespace isac

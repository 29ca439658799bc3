#pragma once
// Brute-force ground truth for tiny instances: exhaustive Bayesian posterior
// over the 5^M compatible support configurations, finite-difference
// differentiation, and Monte-Carlo score covariance. Library code (not
// test-only) so experiment drivers can emit oracle-vs-algorithm gaps.

#include <functional>

#include "isac/fim.hpp"
#include "isac/hmm.hpp"
#include "isac/observation.hpp"

namespace isac {

struct EnumeratedPosterior {
  RVec p_r, p_c;  // exact P(s_m^r = 1 | y), P(s_m^c = 1 | y)
  RVec p_s;       // exact P(s_m = 1 | y)
  CVec x_mean;    // exact posterior mean of stacked [x_r; x_c]
  RVec x_var;     // exact posterior variance per index
  double log_evidence = 0.0;
};

// Exact posterior for the generic stacked model y = F x + n, where x is the
// 2M spike-and-slab vector (radar columns 0..M-1, comm columns M..2M-1) and
// n has independent entries of variance row_noise_var[i]. Enumerates every
// per-index triple (s; s_r, s_c) in {(0;0,0),(1;0,0),(1;1,0),(1;0,1),(1;1,1)}
// with log-domain accumulation. Refuses m > 6.
EnumeratedPosterior enumerate_posterior(const CMat& f, const CVec& y,
                                        const RVec& row_noise_var,
                                        const HmmParams& params);

// Convenience wrapper for the measurement-operator observation model.
EnumeratedPosterior enumerate_posterior(const MeasurementOperator& op,
                                        const Observation& obs,
                                        const HmmParams& params);

// Central finite differences.
double finite_diff_scalar(const std::function<double(double)>& fn, double x,
                          double step);
CVec finite_diff_cvec(const std::function<CVec(double)>& fn, double x,
                      double step);
// Gradient of a scalar field, one central difference per coordinate.
RVec finite_diff_gradient(const std::function<double(const RVec&)>& fn,
                          const RVec& x, double step);

// Monte-Carlo realization of the FIM definition E[score score^T] for the
// Gaussian mean-parameterized observation model of an AoaPartition. The mean
// map is differentiated by finite differences so this stays independent of
// the analytic Jacobians under test.
RMat score_covariance(const AoaPartition& partition, const PilotSet& pilots,
                      double noise_var_r, double noise_var_c, int n_samples,
                      std::uint64_t seed);

}  // namespace isac

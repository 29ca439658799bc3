#pragma once
// Inference E step: Module A (blockwise LMMSE over the measurement operator)
// and Module B (chain-coupled Bernoulli-Gaussian message passing), exchanging
// extrinsic Gaussian beliefs until the Module-B posterior mean settles.

#include <vector>

#include "isac/hmm.hpp"
#include "isac/observation.hpp"

namespace isac {

// Diagonal Gaussian belief over the stacked coefficients [x_r; x_c].
struct GaussianBelief {
  CVec mean;  // length 2M
  RVec var;   // length 2M, strictly positive

  void validate() const;
};

// Marginal activity probabilities per grid index.
struct SupportPosterior {
  RVec pi_r;  // P(s_m^r = 1 | y)
  RVec pi_c;  // P(s_m^c = 1 | y)
};

enum class LmmseVariant { Exact, Banded, PoApprox };

struct EstepConfig {
  int i_in = 30;          // max inner iterations
  double tol = 1e-5;      // stop when ||dx_B^post|| <= tol * max(1, ||x||)
  double damping = 0.5;   // weight on the new extrinsic (1.0 disables)
  LmmseVariant variant = LmmseVariant::Exact;
  // Debug: evaluate the banded expansion exactly as printed in the source
  // derivation (2*B - S*Vinv*S, dimensionally inconsistent) instead of the
  // corrected 2*S - S*Vinv*S with S = B^{-1}.
  bool banded_printed_form = false;

  void validate() const;
};

struct EstepResult {
  GaussianBelief belief;  // Module-B posterior (x_B^post, diag V_B^post)
  SupportPosterior support;
  int iterations_used = 0;
  bool converged = false;
};

// Bernoulli message floor: probabilities are kept in [floor, 1 - floor].
inline constexpr double kProbFloor = 1e-12;
// Extrinsic variances are clamped to ceiling_factor * slab variance when the
// information-form subtraction turns non-positive (no information gained).
inline constexpr double kExtVarCeilingFactor = 1e6;

// Blockwise LMMSE posterior of the stacked coefficients under the prior.
//   Exact:     V_post = (F^H F / var_n + diag(1/var_pri))^{-1} per block
//   Banded:    the inverse is replaced by the first-order expansion
//              2*S - S*Vinv*S around the penta-diagonal part (bandwidth 2,
//              LDL^H banded factorization), S = B^{-1}
//   PoApprox:  scalar-variance approximation tr(F^H R^{-1} F)/(2M) * I with
//              the prior variance averaged to a scalar
// Returned variance is the diagonal of the (approximate) posterior covariance.
GaussianBelief lmmse_update(const MeasurementOperator& op,
                            const Observation& obs,
                            const GaussianBelief& prior, LmmseVariant mode,
                            bool banded_printed_form = false);

// Information-form subtraction: 1/var_ext = 1/var_post - 1/var_pri and the
// matching mean identity. Non-positive extrinsic precision is clamped to the
// per-index variance ceiling (mean kept, variance = ceiling).
GaussianBelief extrinsic(const GaussianBelief& posterior,
                         const GaussianBelief& prior, const RVec& var_ceiling);
GaussianBelief extrinsic(const GaussianBelief& posterior,
                         const GaussianBelief& prior,
                         double var_ceiling = kExtVarCeilingFactor);

// One Module-B pass: the extrinsic belief from Module A is treated as a
// virtual AWGN observation of each coefficient; support evidence is lifted
// through the conditional activity probabilities onto the shared chain,
// forward-backward messages run with gamma_1^f = lambda and gamma_M^b = 1/2,
// and the spike-and-slab posterior moments are returned per coefficient.
void module_b_pass(const GaussianBelief& ext_from_a, const HmmParams& params,
                   GaussianBelief* posterior, SupportPosterior* support);

// Full inner loop: lmmse_update -> extrinsic(A->B) -> module_b_pass ->
// extrinsic(B->A), damped, until the Module-B posterior mean settles.
// Initial Module-A prior: mean 0, variance = stationary activity probability
// times the slab variance per modality.
EstepResult run_estep(const MeasurementOperator& op, const Observation& obs,
                      const HmmParams& params, const EstepConfig& config);

}  // namespace isac

#pragma once
// Joint burst-sparsity prior: a stationary two-state Markov chain s over the
// angular grid marks scatterer clusters; conditionally on s, two Bernoulli
// masks pick which clusters reflect back to the transmitter (radar support
// s_r) and which scatter towards the user (comm support s_c). Active
// coefficients carry zero-mean complex Gaussian gains (spike-and-slab).

#include "isac/common.hpp"

namespace isac {

struct HmmParams {
  double rho01 = 0.1;   // P(s_{m+1}=1 | s_m=0)
  double rho10 = 0.4;   // P(s_{m+1}=0 | s_m=1)
  double rho_r = 0.7;   // P(s_m^r=1 | s_m=1)
  double rho_c_cond = 0.7;  // P(s_m^c=1 | s_m=1)
  double var_r = 1.0;   // slab variance of radar gains
  double var_c = 1.0;   // slab variance of comm gains

  // Stationary activity rate of the chain.
  double lambda() const { return rho01 / (rho01 + rho10); }

  // Rejects degenerate parameterizations up front (zero slab variance would
  // make the spike/slab likelihood ratio singular at run time).
  void validate() const;
};

}  // namespace isac

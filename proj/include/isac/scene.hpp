#pragma once
// Ground-truth scene state: supports, gains, and true (off-grid) AoAs, plus
// samplers for prior draws and clustered CDL-like scene construction.

#include "isac/array.hpp"
#include "isac/hmm.hpp"
#include "isac/rng.hpp"

namespace isac {

struct SupportTriple {
  IVec s;    // cluster indicator (union support)
  IVec s_r;  // radar support, subset of s
  IVec s_c;  // comm support, subset of s
};

struct SceneTruth {
  int m = 0;
  RVec theta;  // true AoA per grid index (jittered at active indices)
  IVec s, s_r, s_c;
  CVec x_r, x_c;  // gains; exactly zero off the respective supports

  int radar_count() const { return s_r.sum(); }
  int comm_count() const { return s_c.sum(); }
};

struct Channels {
  CMat h_radar;  // M x M reflection channel  sum_m x_r[m] a a^H
  CVec h_comm;   // M x 1 uplink channel      sum_m x_c[m] a
};

// One draw of (s, s_r, s_c) from the chain prior.
SupportTriple sample_supports(const HmmParams& p, int m, Rng& rng);

// Gains + off-grid AoAs for a given support. True angles are grid points
// jittered uniformly in sin-space by +/- jitter half-bins (jitter=1 spans the
// full half-bin each side, i.e. the truth stays inside its own bin).
SceneTruth sample_scene(const HmmParams& p, const SupportTriple& sup,
                        const AngularGrid& grid, double jitter, Rng& rng);

// Clustered scene with a controlled radar/comm support overlap.
// rho_common requests |intersection| / |union|; realized by randomized
// rounding of the implied overlap count (throws if the request is
// unsatisfiable, e.g. rho_common=1 with k != l). Supports are laid out as
// bursts of 2..4 adjacent indices.
SceneTruth make_cdl_like_scene(double rho_common, int k_targets, int l_paths,
                               int m, std::uint64_t seed, double jitter = 1.0,
                               double gain_var_r = 1.0, double gain_var_c = 1.0);

Channels synthesize_channels(const SceneTruth& scene);

}  // namespace isac

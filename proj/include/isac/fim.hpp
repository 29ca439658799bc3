#pragma once
// Fisher information for the partitioned AoA parameters (pure-radar, common,
// pure-comm), the Schur-complement EFIM of the radar-relevant angles, and the
// Cramer-Rao matrix. Gains are treated as known constants throughout.

#include "isac/observation.hpp"

namespace isac {

struct AoaPartition {
  RVec theta_r;  // pure-radar AoAs
  RVec theta_s;  // common AoAs (both channels)
  RVec theta_c;  // pure-comm AoAs
  CVec xr_r;     // radar gains at theta_r
  CVec xr_s;     // radar gains at theta_s
  CVec xc_s;     // comm gains at theta_s
  CVec xc_c;     // comm gains at theta_c

  int n_r() const { return static_cast<int>(theta_r.size()); }
  int n_s() const { return static_cast<int>(theta_s.size()); }
  int n_c() const { return static_cast<int>(theta_c.size()); }
  int n_radar() const { return n_r() + n_s(); }  // EFIM dimension
  int n_total() const { return n_r() + n_s() + n_c(); }

  // Angles in global parameter order [theta_r; theta_s; theta_c].
  RVec all_theta() const;
  void validate() const;

  // Built from a detected support: indices with radar posterior above the
  // threshold are targets, comm-only detections are pure-comm paths.
  static AoaPartition from_detections(const RVec& theta, const RVec& p_r,
                                      const RVec& p_c, const CVec& x_r,
                                      const CVec& x_c, double threshold);

  // Ground-truth partition of a scene.
  static AoaPartition from_scene(const SceneTruth& scene);
};

struct EfimBundle {
  int n_r = 0, n_s = 0, n_c = 0;
  RMat j_full;  // (n_r+n_s+n_c)^2, order [theta_r; theta_s; theta_c]
  RMat j_eff;   // (n_r+n_s)^2 EFIM after Schur-complementing theta_c
  double noise_var_r = 1.0, noise_var_c = 1.0;
  CMat psi_r;  // (P M^2) x M^2 stacked I_M (x) v_p^T, acts on vec((H^r)^T)
  CMat psi_c;  // identical to the uplink operator U

  // Radar-parameter block of the full FIM (the part EFIM cannot exceed).
  RMat radar_block() const {
    return j_full.topLeftCorner(n_r + n_s, n_r + n_s);
  }
};

// Jacobian rows of the vectorized channels w.r.t. each partition angle:
// dhr rows are d vec((H^r)^T)/d theta_k = x_k vec((a'a^H + a a'^H)^T) for
// k over [theta_r; theta_s]; dhc rows are x_l a'(theta_l)^T-style rows for
// l over [theta_s; theta_c].
struct ChannelJacobians {
  CMat dhr;  // (n_r+n_s) x M^2
  CMat dhc;  // (n_s+n_c) x M
};
ChannelJacobians channel_jacobians(const AoaPartition& partition, int m);

// Full FIM blocks (2/sigma^2 Re{...} structure) and the EFIM. Uses all
// downlink pilots in the set (both stages) and the uplink pilots.
EfimBundle assemble_fim(const AoaPartition& partition, const PilotSet& pilots,
                        double noise_var_r, double noise_var_c);

// As assemble_fim, but the stage-two downlink pilots enter only through the
// aggregate covariance W = sum_p V_p (the EFIM is affine in W). Agrees with
// assemble_fim when each V_p = v_p v_p^H.
EfimBundle efim_from_covariances(const AoaPartition& partition,
                                 const PilotSet& stage1_pilots,
                                 const std::vector<CMat>& covariances,
                                 double noise_var_r, double noise_var_c);

// CRB = inverse of the EFIM; diagonal entries lower-bound per-AoA MSE.
RMat crb(const EfimBundle& bundle);

}  // namespace isac

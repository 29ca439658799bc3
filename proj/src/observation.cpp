#include "isac/observation.hpp"

namespace isac {

CMat PilotSet::dps(Stage stage) const {
  switch (stage) {
    case Stage::One:
      return dp1;
    case Stage::Two:
      return dp2;
    case Stage::Both: {
      CMat all(dp1.rows(), dp1.cols() + dp2.cols());
      all << dp1, dp2;
      return all;
    }
  }
  throw ConfigError("PilotSet: unknown stage");
}

void PilotSet::validate() const {
  require(power_budget > 0.0, "PilotSet: power budget must be positive");
  require(dp2.size() == 0 || dp2.rows() == dp1.rows(),
          "PilotSet: stage mismatch in antenna count");
  const double tol = 1e-9 * std::max(1.0, power_budget);
  for (int p = 0; p < p1(); ++p)
    require(dp1.col(p).squaredNorm() <= power_budget + tol,
            "PilotSet: stage-one pilot exceeds power budget");
  for (int p = 0; p < p2(); ++p)
    require(dp2.col(p).squaredNorm() <= power_budget + tol,
            "PilotSet: stage-two pilot exceeds power budget");
  for (int i = 0; i < q(); ++i)
    require(std::abs(std::abs(up(i)) - 1.0) < 1e-9,
            "PilotSet: uplink pilots must be unit modulus");
}

CMat make_omni_dps(int m, int p, double power_budget, Rng& rng) {
  require(m >= 1 && p >= 0, "make_omni_dps: bad dimensions");
  require(p <= m, "make_omni_dps: at most m orthogonal pilots");
  if (p == 0) return CMat(m, 0);
  const CMat g = cnormal_mat(rng, m, m);
  const Eigen::HouseholderQR<CMat> qr(g);
  CMat qfull = qr.householderQ() * CMat::Identity(m, p);
  return std::sqrt(power_budget) * qfull;
}

CVec make_unit_modulus_ups(int q, Rng& rng) {
  require(q >= 0, "make_unit_modulus_ups: bad count");
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  CVec up(q);
  for (int i = 0; i < q; ++i) {
    const double phi = u(rng);
    up(i) = cplx(std::cos(phi), std::sin(phi));
  }
  return up;
}

MeasurementOperator build_operator(const PilotSet& pilots,
                                   const AngularGrid& grid, Stage stage) {
  pilots.validate();
  const int m = pilots.m();
  require(grid.size() == m, "build_operator: grid/pilot size mismatch");
  const CMat dps = pilots.dps(stage);
  const int p = static_cast<int>(dps.cols());
  const int q = pilots.q();

  MeasurementOperator op;
  op.m = m;
  op.p = p;
  op.q = q;
  op.v_mat.setZero(p * m, m * m);
  for (int pp = 0; pp < p; ++pp)
    for (int j = 0; j < m; ++j)
      op.v_mat.block(pp * m, j * m, m, m) =
          dps(j, pp) * CMat::Identity(m, m);
  op.u_mat.setZero(q * m, m);
  for (int qq = 0; qq < q; ++qq)
    op.u_mat.block(qq * m, 0, m, m) = pilots.up(qq) * CMat::Identity(m, m);

  // Columns via the lifted identity (v^T (x) I) vec(a a^H) = (a a^H) v,
  // cheaper than the M^2-sized product and numerically identical.
  op.f_r.setZero(p * m, m);
  op.f_c.setZero(q * m, m);
  for (int k = 0; k < m; ++k) {
    const CVec a = steering_vector(grid.theta(k), m);
    for (int pp = 0; pp < p; ++pp) {
      const cplx av = a.dot(dps.col(pp));  // a^H v_p
      op.f_r.col(k).segment(pp * m, m) = a * av;
    }
    for (int qq = 0; qq < q; ++qq)
      op.f_c.col(k).segment(qq * m, m) = pilots.up(qq) * a;
  }
  return op;
}

Observation observe(const SceneTruth& scene, const PilotSet& pilots,
                    Stage stage, double noise_var_r, double noise_var_c,
                    Rng& rng) {
  pilots.validate();
  require(noise_var_r > 0.0 && noise_var_c > 0.0,
          "observe: noise variances must be positive");
  require(pilots.m() == scene.m, "observe: scene/pilot size mismatch");
  const Channels ch = synthesize_channels(scene);
  const CMat dps = pilots.dps(stage);
  const int p = static_cast<int>(dps.cols());
  const int q = (stage == Stage::Two) ? 0 : pilots.q();

  Observation obs;
  obs.noise_var_r = noise_var_r;
  obs.noise_var_c = noise_var_c;
  obs.y_r.resize(p * scene.m);
  for (int pp = 0; pp < p; ++pp)
    obs.y_r.segment(pp * scene.m, scene.m) =
        ch.h_radar * dps.col(pp) + cnormal_vec(rng, scene.m, noise_var_r);
  obs.y_c.resize(q * scene.m);
  for (int qq = 0; qq < q; ++qq)
    obs.y_c.segment(qq * scene.m, scene.m) =
        pilots.up(qq) * ch.h_comm + cnormal_vec(rng, scene.m, noise_var_c);
  return obs;
}

Observation stack_observations(const Observation& first,
                               const Observation& second) {
  require(first.noise_var_r == second.noise_var_r,
          "stack_observations: radar noise variance changed between stages");
  Observation out;
  out.noise_var_r = first.noise_var_r;
  out.noise_var_c = first.noise_var_c;
  out.y_r.resize(first.y_r.size() + second.y_r.size());
  out.y_r << first.y_r, second.y_r;
  out.y_c = first.y_c.size() ? first.y_c : second.y_c;
  return out;
}

}  // namespace isac

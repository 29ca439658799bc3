#include "isac/mstep.hpp"

#include <cmath>

namespace isac {

void MstepConfig::validate() const {
  require(i_out >= 1, "MstepConfig: i_out must be >= 1");
  require(armijo.c1 > 0.0 && armijo.c1 < 1.0, "MstepConfig: c1 in (0,1)");
  require(armijo.beta > 0.0 && armijo.beta < 1.0, "MstepConfig: beta in (0,1)");
  require(armijo.max_backtracks >= 0, "MstepConfig: max_backtracks >= 0");
  require(grid_tol > 0.0 && step_init > 0.0,
          "MstepConfig: positive tolerances required");
}

namespace {

// Everything Q and its gradient need, vectorized over the grid. Per-column
// structure of the operator blocks:
//   radar col m, block p: (a_m^H v_p) a_m      -> W(m,p) = a_m^H v_p
//   comm  col m, block q:  u_q a_m
struct QWorkspace {
  int m = 0, p = 0, q = 0;
  CMat a, da;    // M x Mg steering vectors and derivatives per grid angle
  CMat w, wp;    // Mg x P: a^H v_p and a'^H v_p
  CVec rr, rc;   // residuals y - F x
  CVec dcol;     // Mg: a'_m^H a_m (purely imaginary)
};

QWorkspace build_workspace(const AngularGrid& grid,
                           const GaussianBelief& belief,
                           const PilotSet& pilots, Stage stage,
                           const Observation& obs) {
  const int m = pilots.m();
  const int mg = grid.size();
  require(belief.mean.size() == 2 * mg, "surrogate: belief/grid mismatch");
  const CMat dps = pilots.dps(stage);
  const int p = static_cast<int>(dps.cols());
  const int q = stage == Stage::Two ? 0 : pilots.q();
  require(obs.y_r.size() == p * m && obs.y_c.size() == q * m,
          "surrogate: observation rows do not match pilots/stage");

  QWorkspace ws;
  ws.m = m;
  ws.p = p;
  ws.q = q;
  ws.a.resize(m, mg);
  ws.da.resize(m, mg);
  ws.dcol.resize(mg);
  for (int k = 0; k < mg; ++k) {
    ws.a.col(k) = steering_vector(grid.theta(k), m);
    ws.da.col(k) = steering_derivative(grid.theta(k), m);
    ws.dcol(k) = ws.da.col(k).dot(ws.a.col(k));
  }
  ws.w = ws.a.adjoint() * dps;
  ws.wp = ws.da.adjoint() * dps;

  const CVec xr = belief.mean.head(mg);
  const CVec xc = belief.mean.tail(mg);
  ws.rr = obs.y_r;
  for (int pp = 0; pp < p; ++pp)
    ws.rr.segment(pp * m, m) -= ws.a * xr.cwiseProduct(ws.w.col(pp));
  ws.rc = obs.y_c;
  const CVec hc = ws.a * xc;
  for (int qq = 0; qq < q; ++qq)
    ws.rc.segment(qq * m, m) -= pilots.up(qq) * hc;
  return ws;
}

double q_from_workspace(const QWorkspace& ws, const GaussianBelief& belief,
                        const Observation& obs) {
  const int mg = static_cast<int>(ws.w.rows());
  const RVec vr = belief.var.head(mg);
  const RVec vc = belief.var.tail(mg);
  // ||a_m|| = 1, so ||f_r col m||^2 = sum_p |W(m,p)|^2 and
  // ||f_c col m||^2 = q. A modality with no pilot rows contributes nothing.
  const double var_term_r =
      ws.p > 0
          ? (ws.w.cwiseAbs2().rowwise().sum().array() * vr.array()).sum()
          : 0.0;
  const double var_term_c = ws.q * vc.sum();
  const double rr2 = ws.rr.size() > 0 ? ws.rr.squaredNorm() : 0.0;
  const double rc2 = ws.rc.size() > 0 ? ws.rc.squaredNorm() : 0.0;
  return -(rr2 + var_term_r) / obs.noise_var_r -
         (rc2 + var_term_c) / obs.noise_var_c;
}

}  // namespace

double surrogate_q(const AngularGrid& grid, const GaussianBelief& belief,
                   const PilotSet& pilots, Stage stage,
                   const Observation& obs) {
  const QWorkspace ws = build_workspace(grid, belief, pilots, stage, obs);
  return q_from_workspace(ws, belief, obs);
}

RVec gradient_q(const AngularGrid& grid, const GaussianBelief& belief,
                const PilotSet& pilots, Stage stage, const Observation& obs) {
  const QWorkspace ws = build_workspace(grid, belief, pilots, stage, obs);
  const int mg = grid.size();
  const CVec xr = belief.mean.head(mg);
  const CVec xc = belief.mean.tail(mg);
  const RVec vr = belief.var.head(mg);
  const RVec vc = belief.var.tail(mg);

  // Per-block contractions with the residuals: S1(m,p) = a_m^H r_p,
  // S2(m,p) = a'_m^H r_p; comm side collapses over q via conj(u).
  CMat s1(mg, ws.p), s2(mg, ws.p);
  for (int pp = 0; pp < ws.p; ++pp) {
    s1.col(pp) = ws.a.adjoint() * ws.rr.segment(pp * ws.m, ws.m);
    s2.col(pp) = ws.da.adjoint() * ws.rr.segment(pp * ws.m, ws.m);
  }
  CVec zc = CVec::Zero(ws.m);
  for (int qq = 0; qq < ws.q; ++qq)
    zc += std::conj(pilots.up(qq)) * ws.rc.segment(qq * ws.m, ws.m);
  const CVec dz = ws.da.adjoint() * zc;

  RVec grad(mg);
  for (int k = 0; k < mg; ++k) {
    // d col_m / d theta = (a'^H v_p) a + (a^H v_p) a', so
    //   f'^H r = sum_p conj(W'(m,p)) S1(m,p) + conj(W(m,p)) S2(m,p)
    //   f'^H f = sum_p conj(W'(m,p)) W(m,p) + |W(m,p)|^2 a'^H a
    cplx fr_dot_r = 0.0, fr_dot_f = 0.0;
    for (int pp = 0; pp < ws.p; ++pp) {
      fr_dot_r += std::conj(ws.wp(k, pp)) * s1(k, pp) +
                  std::conj(ws.w(k, pp)) * s2(k, pp);
      fr_dot_f += std::conj(ws.wp(k, pp)) * ws.w(k, pp) +
                  std::norm(ws.w(k, pp)) * ws.dcol(k);
    }
    const cplx fc_dot_r = dz(k);
    const cplx fc_dot_f = static_cast<double>(ws.q) * ws.dcol(k);
    grad(k) =
        (2.0 / obs.noise_var_r) *
            ((std::conj(xr(k)) * fr_dot_r).real() - vr(k) * fr_dot_f.real()) +
        (2.0 / obs.noise_var_c) *
            ((std::conj(xc(k)) * fc_dot_r).real() - vc(k) * fc_dot_f.real());
  }
  return grad;
}

AngularGrid mstep_update(const AngularGrid& grid, const RVec& gradient,
                         const GaussianBelief& belief, const PilotSet& pilots,
                         Stage stage, const Observation& obs,
                         const MstepConfig& config) {
  config.validate();
  require(gradient.size() == grid.size(), "mstep_update: gradient size");
  require(gradient.allFinite(), "mstep_update: gradient must be finite");
  const double gmax = gradient.cwiseAbs().maxCoeff();
  if (gmax == 0.0) return grid;

  const double q0 = surrogate_q(grid, belief, pilots, stage, obs);
  const double g2 = gradient.squaredNorm();
  // Collision guard: no angle may travel further than half the minimal grid
  // spacing in one accepted step.
  double tau = std::min(config.step_init,
                        0.5 * grid.min_spacing() / gmax);
  const double bound = 0.5 * kPi - 1e-9;
  for (int bt = 0; bt <= config.armijo.max_backtracks; ++bt) {
    AngularGrid cand = grid;
    cand.theta += tau * gradient;
    cand.theta = cand.theta.cwiseMax(-bound).cwiseMin(bound);
    const double qc = surrogate_q(cand, belief, pilots, stage, obs);
    if (qc >= q0 + config.armijo.c1 * tau * g2) return cand;
    tau *= config.armijo.beta;
  }
  return grid;  // stationary: sufficient increase unattainable
}

TurboResult run_turbo_sbi(const PilotSet& pilots, Stage stage,
                          const Observation& obs, const HmmParams& params,
                          const EstepConfig& ecfg, const MstepConfig& mcfg,
                          std::vector<MstepTraceRow>* trace) {
  mcfg.validate();
  TurboResult res;
  res.grid = AngularGrid::uniform(pilots.m());

  for (int it = 1; it <= mcfg.i_out; ++it) {
    res.outer_iterations = it;
    const MeasurementOperator op = build_operator(pilots, res.grid, stage);
    const EstepResult est = run_estep(op, obs, params, ecfg);

    RVec g = gradient_q(res.grid, est.belief, pilots, stage, obs);
    if (mcfg.restrict_updates)
      for (int k = 0; k < g.size(); ++k)
        if (std::max(est.support.pi_r(k), est.support.pi_c(k)) <
            mcfg.support_floor)
          g(k) = 0.0;

    const AngularGrid next =
        mstep_update(res.grid, g, est.belief, pilots, stage, obs, mcfg);
    const double delta = (next.theta - res.grid.theta).norm();
    if (trace)
      trace->push_back({it,
                        surrogate_q(next, est.belief, pilots, stage, obs),
                        (next.theta - res.grid.theta).cwiseAbs().maxCoeff()});
    res.grid = next;
    if (delta <= mcfg.grid_tol) {
      res.converged = true;
      break;
    }
  }

  const MeasurementOperator op = build_operator(pilots, res.grid, stage);
  const EstepResult est = run_estep(op, obs, params, ecfg);
  res.belief = est.belief;
  res.support = est.support;
  return res;
}

}  // namespace isac

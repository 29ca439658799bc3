#include "isac/sdp.hpp"

#include <cmath>
#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace isac {

RVec herm_coords(const CMat& v) {
  const int n = static_cast<int>(v.rows());
  RVec x(n * n);
  for (int i = 0; i < n; ++i) x(i) = v(i, i).real();
  int idx = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      x(idx++) = v(i, j).real();
      x(idx++) = v(i, j).imag();
    }
  return x;
}

CMat herm_from_coords(const RVec& x, int n) {
  CMat v(n, n);
  for (int i = 0; i < n; ++i) v(i, i) = x(i);
  int idx = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      v(i, j) = cplx(x(idx), x(idx + 1));
      v(j, i) = std::conj(v(i, j));
      idx += 2;
    }
  return v;
}

RVec herm_read(const CMat& s) {
  const int n = static_cast<int>(s.rows());
  RVec r = herm_coords(s);
  r.tail(n * n - n) *= 2.0;
  return r;
}

void ConvexSubproblem::validate() const {
  require(n_t >= 1 && p2 >= 1 && k >= 1, "subproblem: empty dimensions");
  require(c_eff.rows() == k && c_eff.cols() == k && c_eff.allFinite(),
          "subproblem: bad constant term");
  require(static_cast<int>(gain.size()) == k * (k + 1) / 2,
          "subproblem: gain count must be k(k+1)/2");
  for (const CMat& g : gain) {
    require(g.rows() == n_t && g.cols() == n_t && g.allFinite(),
            "subproblem: bad gain matrix");
    require((g - g.adjoint()).norm() <= 1e-10 * (1.0 + g.norm()),
            "subproblem: gain matrices must be Hermitian");
  }
  require(trace_bound > 0.0, "subproblem: trace bound must be positive");
  if (!rank_d.empty()) {
    require(static_cast<int>(rank_d.size()) == p2 && rank_c.size() == p2,
            "subproblem: rank constraint count mismatch");
    for (const CMat& d : rank_d)
      require(d.rows() == n_t && d.cols() == n_t && d.allFinite(),
              "subproblem: bad rank matrix");
    require(rank_c.allFinite(), "subproblem: bad rank bounds");
  }
}

RMat ConvexSubproblem::efim(const std::vector<CMat>& v_mats) const {
  require(static_cast<int>(v_mats.size()) == p2, "efim: variable count");
  CMat w = CMat::Zero(n_t, n_t);
  for (const CMat& v : v_mats) w += v;
  RMat s = c_eff;
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      const double t = (gain[upper_pair_index(i, j, k)] * w).trace().real();
      s(i, j) += t;
      if (j != i) s(j, i) += t;
    }
  return s;
}

namespace {

void solver_check(bool cond, const char* msg) {
  if (!cond) throw NumericalError(msg);
}

RVec sym_svec(const RMat& a) {
  const int k = static_cast<int>(a.rows());
  RVec s(k * (k + 1) / 2);
  const double r2 = std::sqrt(2.0);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j)
      s(upper_pair_index(i, j, k)) = i == j ? a(i, i) : r2 * a(i, j);
  return s;
}

struct BarrierEval {
  bool feasible = false;
  double f = 0.0;                 // t*lambda + sum of barrier terms
  RMat s, sinv;
  RVec slack;                     // [trace per p, rank per p]
};

struct BarrierProblem {
  const ConvexSubproblem* sub = nullptr;
  RMat c;                 // normalized constant term
  std::vector<CMat> g;    // normalized gains
  double scale = 1.0;
  int nv = 0, n = 0, q = 0, n_slack = 0;
  RVec read_scale;        // 1 on diagonal coords, 2 on off-diagonal coords
  RMat phi;               // nv x q: per-coordinate svec of the LMI derivative
  RVec phi_lambda;        // q: svec(-I)
  std::vector<RVec> slack_grad;  // read vectors of I and rank_d[p]

  RMat lmi(const std::vector<CMat>& v) const {
    CMat w = CMat::Zero(sub->n_t, sub->n_t);
    for (const CMat& vp : v) w += vp;
    RMat s = c;
    for (int i = 0; i < sub->k; ++i)
      for (int j = i; j < sub->k; ++j) {
        const double t =
            (g[upper_pair_index(i, j, sub->k)] * w).trace().real();
        s(i, j) += t;
        if (j != i) s(j, i) += t;
      }
    return s;
  }

  BarrierEval evaluate(const std::vector<CMat>& v, double lambda,
                       double t) const {
    BarrierEval e;
    e.f = t * lambda;
    e.slack.resize(n_slack);
    const int n_t = sub->n_t;
    for (int p = 0; p < sub->p2; ++p) {
      Eigen::LLT<CMat> llt(v[p]);
      if (llt.info() != Eigen::Success) return e;
      const CMat l = llt.matrixL();
      for (int i = 0; i < n_t; ++i) {
        const double d = l(i, i).real();
        if (d <= 0.0) return e;
        e.f += 2.0 * std::log(d);
      }
      const double tr = v[p].trace().real();
      e.slack(p) = sub->trace_bound - tr;
      if (!sub->rank_d.empty())
        e.slack(sub->p2 + p) =
            sub->rank_c(p) - (sub->rank_d[p] * v[p]).trace().real();
    }
    for (int i = 0; i < n_slack; ++i) {
      if (e.slack(i) <= 0.0) return e;
      e.f += std::log(e.slack(i));
    }
    e.s = lmi(v);
    e.s.diagonal().array() -= lambda;
    Eigen::LLT<RMat> slt(e.s);
    if (slt.info() != Eigen::Success) return e;
    const RMat sl = slt.matrixL();
    for (int i = 0; i < sub->k; ++i) {
      if (sl(i, i) <= 0.0) return e;
      e.f += 2.0 * std::log(sl(i, i));
    }
    e.sinv = slt.solve(RMat::Identity(sub->k, sub->k));
    e.feasible = true;
    return e;
  }

  // Closed-form inverse of the -logdet(V_p) metric: in read space r maps to
  // coords(V * build(r / read_scale) * V).
  RVec metric_inverse(const CMat& v, const RVec& r) const {
    const CMat x = herm_from_coords(
        (r.array() / read_scale.array()).matrix(), sub->n_t);
    return herm_coords(v * x * v);
  }
};

}  // namespace

SubproblemSolution solve_subproblem(const ConvexSubproblem& sub, double tol,
                                    const std::vector<CMat>* warm) {
  sub.validate();
  require(tol > 0.0, "solve_subproblem: tol must be positive");
  const int n_t = sub.n_t, p2 = sub.p2, k = sub.k;
  const bool has_rank = !sub.rank_d.empty();

  BarrierProblem bp;
  bp.sub = &sub;
  bp.scale = std::max(1.0, sub.c_eff.norm());
  bp.c = sub.c_eff / bp.scale;
  bp.g = sub.gain;
  for (CMat& m : bp.g) m /= bp.scale;
  bp.nv = herm_coord_count(n_t);
  bp.n = p2 * bp.nv + 1;
  bp.q = k * (k + 1) / 2;
  bp.n_slack = p2 * (has_rank ? 2 : 1);
  bp.read_scale = RVec::Ones(bp.nv);
  bp.read_scale.tail(bp.nv - n_t).setConstant(2.0);
  bp.phi.resize(bp.nv, bp.q);
  const double r2 = std::sqrt(2.0);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      const int a = upper_pair_index(i, j, k);
      bp.phi.col(a) = herm_read(bp.g[a]) * (i == j ? 1.0 : r2);
    }
  bp.phi_lambda = sym_svec(-RMat::Identity(k, k));
  bp.slack_grad.resize(bp.n_slack);
  for (int p = 0; p < p2; ++p) {
    bp.slack_grad[p] = herm_read(CMat::Identity(n_t, n_t));
    if (has_rank) bp.slack_grad[p2 + p] = herm_read(sub.rank_d[p]);
  }

  // Strictly feasible start.
  std::vector<CMat> v(p2);
  if (warm) {
    require(static_cast<int>(warm->size()) == p2,
            "solve_subproblem: warm start size mismatch");
    v = *warm;
  } else {
    for (int p = 0; p < p2; ++p)
      v[p] = (0.9 * sub.trace_bound / n_t) * CMat::Identity(n_t, n_t);
  }
  const RMat j0 = bp.lmi(v);
  Eigen::SelfAdjointEigenSolver<RMat> es(j0);
  const double lmin = es.eigenvalues().minCoeff();
  double lambda = lmin - std::max(1e-6, 0.05 * std::max(1.0, std::abs(lmin)));

  const double nu = p2 * n_t + k + bp.n_slack;
  const double gap_factor = nu + std::sqrt(nu);
  double t = std::max(1.0, nu);
  const double mu = 30.0;

  SubproblemSolution sol;
  {
    const BarrierEval e0 = bp.evaluate(v, lambda, t);
    if (!e0.feasible)
      throw ConfigError(
          "solve_subproblem: start point is not strictly feasible "
          "(certificate: a variable, slack, or LMI factorization failed)");
  }

  // The t ladder climbs until the gap certificate meets tol or the Newton
  // arithmetic is exhausted (terminal rounds of a rank-deficient optimum
  // condition like 1/gap^2; double precision dies near gap ~ 1e-7). On
  // exhaustion the solve stops and reports the gap certified by the last
  // cleanly centered round instead of pretending to meet tol.
  int total_newton = 0;
  double certified_t = 0.0;
  std::vector<CMat> v_cert;
  bool exhausted = false;
  while (true) {
    bool centered = false;
    for (int step = 0; step < 80; ++step) {
      solver_check(++total_newton < 1200,
                   "solve_subproblem: Newton budget exceeded");
      const BarrierEval e = bp.evaluate(v, lambda, t);
      solver_check(e.feasible, "solve_subproblem: interior point lost");

      // The logdet(V_p) gradient is kept symbolic: through the closed-form
      // metric inverse it telescopes exactly (D^{-1} read(V^{-1}) = coords(V),
      // read(V^{-1}) . coords(V X V) = x . coords(V), read(V^{-1}) . coords(V)
      // = n_t). Forming V^{-1} numerically injects kappa(V)^2 rounding error
      // into the decrement near the rank-deficient optimum face, flipping its
      // sign and faking convergence.
      const RVec ssv = sym_svec(e.sinv);
      const RVec lmi_gv = bp.phi * ssv;          // shared by every V_p block
      const double gl = t + bp.phi_lambda.dot(ssv);  // = t - tr(Sinv)
      const int n_v = p2 * bp.nv;
      RVec r(n_v);   // explicit (LMI + slack) part of the V-gradient
      RVec cv(n_v);  // stacked coords(V_p) = D^{-1} of the symbolic part
      for (int p = 0; p < p2; ++p) {
        RVec rb = lmi_gv - bp.slack_grad[p] / e.slack(p);
        if (has_rank) rb -= bp.slack_grad[p2 + p] / e.slack(p2 + p);
        r.segment(p * bp.nv, bp.nv) = rb;
        cv.segment(p * bp.nv, bp.nv) = herm_coords(v[p]);
      }

      // LMI Hessian in svec coordinates: Hs = congruence metric of Sinv.
      RMat hs(bp.q, bp.q);
      for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) {
          RMat y = e.sinv.col(i) * e.sinv.row(j);
          if (i != j) y = (y + RMat(e.sinv.col(j) * e.sinv.row(i))) / r2;
          hs.col(upper_pair_index(i, j, k)) = sym_svec(0.5 * (y + y.transpose()));
        }
      Eigen::LLT<RMat> hs_llt(hs);
      if (hs_llt.info() != Eigen::Success) {
        hs.diagonal().array() += 1e-14 * hs.trace();
        hs_llt.compute(hs);
        solver_check(hs_llt.info() == Eigen::Success,
                     "solve_subproblem: LMI metric factorization failed");
      }
      const RMat hs_l = hs_llt.matrixL();

      // Low-rank factor of the V-block Hessian: A = D + U U^T with
      // U = [Phi*L_hs (replicated per block), slack gradients / slack].
      const int n_lr = bp.q + bp.n_slack;
      RMat u(n_v, n_lr);
      const RMat phi_l = bp.phi * hs_l;
      for (int p = 0; p < p2; ++p) {
        u.block(p * bp.nv, 0, bp.nv, bp.q) = phi_l;
        u.col(bp.q + p).setZero();
        u.block(p * bp.nv, bp.q + p, bp.nv, 1) =
            bp.slack_grad[p] / e.slack(p);
        if (has_rank) {
          u.col(bp.q + p2 + p).setZero();
          u.block(p * bp.nv, bp.q + p2 + p, bp.nv, 1) =
              bp.slack_grad[p2 + p] / e.slack(p2 + p);
        }
      }
      // Cross term H_{v,lambda} comes from the LMI only; build it from the
      // same factor as the Schur vector so the system stays self-consistent
      // even when the metric factorization needed a ridge.
      const RVec w_h = hs_l.transpose() * bp.phi_lambda;
      RVec b(n_v);
      const RVec b_block = bp.phi * (hs_l * w_h);
      for (int p = 0; p < p2; ++p) b.segment(p * bp.nv, bp.nv) = b_block;

      // D^{-1} applications (blockwise closed form).
      const auto dinv = [&](const RVec& y) {
        RVec out(n_v);
        for (int p = 0; p < p2; ++p)
          out.segment(p * bp.nv, bp.nv) =
              bp.metric_inverse(v[p], y.segment(p * bp.nv, bp.nv));
        return out;
      };
      RMat dinv_u(n_v, n_lr);
      for (int c = 0; c < n_lr; ++c) dinv_u.col(c) = dinv(u.col(c));
      RMat small = RMat::Identity(n_lr, n_lr) + u.transpose() * dinv_u;
      Eigen::LDLT<RMat> small_ldlt(small);
      if (small_ldlt.info() != Eigen::Success) {
        // Rounding broke the reduced system at this barrier weight; the last
        // certified center still carries an honest gap.
        exhausted = true;
        break;
      }
      // A^{-1} y = dinv(y - U M^{-1} U^T dinv(y)) with M = I + U^T D^{-1} U;
      // applied to the V-gradient the symbolic logdet part contributes
      // coords(V) up front and rides along inside the U^T projection.
      const RVec dg = cv + dinv(r);  // = D^{-1} g_v exactly
      const RVec y_g = r - u * small_ldlt.solve(u.transpose() * dg);
      const RVec ainv_gv = cv + dinv(y_g);
      const RVec y_b = b - u * small_ldlt.solve(u.transpose() * dinv(b));
      const RVec ainv_b = dinv(y_b);
      // Schur complement of lambda: c_ll - b^T A^{-1} b telescopes to the
      // cancellation-free quadratic form w^T [(I + U^T D^{-1} U)^{-1}]_11 w
      // with w = L_hs^T phi_lambda (Woodbury: I - U^T A^{-1} U = M^{-1}).
      RVec w_pad = RVec::Zero(n_lr);
      w_pad.head(bp.q) = w_h;
      const double denom = w_pad.dot(small_ldlt.solve(w_pad));
      if (!(denom > 0.0)) {
        // Same terminal failure mode as above, surfacing in the lambda
        // Schur complement instead of the factorization.
        exhausted = true;
        break;
      }
      const double dlambda = (gl - b.dot(ainv_gv)) / denom;
      const RVec dv = ainv_gv - dlambda * ainv_b;

      // Newton decrement squared: affine-invariant, so the threshold needs
      // no problem scaling. lambda(x) <= 0.1 is far inside the region the
      // (nu + sqrt(nu))/t gap certificate covers (valid up to ~0.5).
      // g_v . dv resolves to p2*n_t + (y_g - dlambda*y_b) . cv + r . dv.
      const double decrement = p2 * n_t +
                               (y_g - dlambda * y_b).dot(cv) + r.dot(dv) +
                               gl * dlambda;
      // A clearly negative value means the Newton system could no longer be
      // solved to working accuracy; stop instead of trusting it.
      if (decrement < -1e-2) {
        exhausted = true;
        break;
      }
      if (decrement <= 1e-2) {
        centered = true;
        break;
      }

      // Backtracking line search keeping the iterate strictly interior.
      double alpha = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        std::vector<CMat> vn = v;
        for (int p = 0; p < p2; ++p)
          vn[p] += alpha * herm_from_coords(dv.segment(p * bp.nv, bp.nv), n_t);
        const double ln = lambda + alpha * dlambda;
        const BarrierEval en = bp.evaluate(vn, ln, t);
        if (en.feasible && en.f >= e.f + 0.25 * alpha * decrement) {
          v = std::move(vn);
          lambda = ln;
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // Progress exhausted by floating-point resolution; still a usable
        // center while the decrement is within the certificate's region.
        if (decrement <= 0.25) centered = true;
        else exhausted = true;
        break;
      }
    }
    if (!centered && !exhausted) exhausted = true;  // step cap hit

    if (centered) {
      certified_t = t;
      v_cert = v;
    }
    if (exhausted || gap_factor / t <= tol) break;
    // Cap the last increase so the final round runs at the smallest t that
    // meets the gap; overshooting by a full factor of mu makes the terminal
    // centers needlessly ill-conditioned.
    t = std::min(t * mu, 1.0000001 * gap_factor / tol);
  }
  solver_check(certified_t > 0.0, "solve_subproblem: no centered round");

  // The barrier's lambda trails the LMI floor by construction; the smallest
  // eigenvalue of the LMI at a feasible iterate is the achieved objective,
  // and the centering certificate bounds lambda* against it just as well.
  // After exhaustion the line-searched iterate may still beat the certified
  // snapshot; return whichever achieves the larger floor.
  double best;
  {
    Eigen::SelfAdjointEigenSolver<RMat> fin(bp.lmi(v));
    best = std::max(lambda, fin.eigenvalues().minCoeff());
  }
  if (exhausted) {
    Eigen::SelfAdjointEigenSolver<RMat> cert(bp.lmi(v_cert));
    if (cert.eigenvalues().minCoeff() > best) {
      v = v_cert;
      best = cert.eigenvalues().minCoeff();
    }
  }
  sol.v_mats = v;
  sol.lambda = best * bp.scale;
  sol.gap = gap_factor / certified_t * bp.scale;
  sol.newton_steps = total_newton;
  return sol;
}

}  // namespace isac

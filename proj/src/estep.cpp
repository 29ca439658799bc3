#include "isac/estep.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

namespace isac {

void GaussianBelief::validate() const {
  require(mean.size() == var.size(), "GaussianBelief: mean/var size mismatch");
  require(var.allFinite() && (var.array() > 0.0).all(),
          "GaussianBelief: variances must be positive and finite");
}

void EstepConfig::validate() const {
  require(i_in >= 1, "EstepConfig: i_in must be >= 1");
  require(tol > 0.0, "EstepConfig: tol must be positive");
  require(damping > 0.0 && damping <= 1.0,
          "EstepConfig: damping must lie in (0, 1]");
}

namespace {

constexpr int kBandwidth = 2;

double clamp_prob(double p) {
  return std::min(std::max(p, kProbFloor), 1.0 - kProbFloor);
}

double sigmoid(double llr) {
  if (llr >= 0.0) return 1.0 / (1.0 + std::exp(-llr));
  const double e = std::exp(llr);
  return e / (1.0 + e);
}

// Unit-lower-triangular banded LDL^H of a Hermitian matrix; only entries with
// |i - j| <= kBandwidth are read. D may be indefinite (the banded truncation
// of a positive-definite matrix need not be), which LDL^H tolerates.
struct BandedLdl {
  CMat l;  // unit lower triangle, band only
  RVec d;

  void factor(const CMat& b) {
    const int n = static_cast<int>(b.rows());
    l = CMat::Zero(n, n);
    d.resize(n);
    for (int j = 0; j < n; ++j) {
      double dj = b(j, j).real();
      for (int k = std::max(0, j - kBandwidth); k < j; ++k)
        dj -= std::norm(l(j, k)) * d(k);
      require(std::abs(dj) > 1e-300, "banded LDL^H: zero pivot");
      d(j) = dj;
      for (int i = j + 1; i <= std::min(n - 1, j + kBandwidth); ++i) {
        cplx s = b(i, j);
        for (int k = std::max({0, i - kBandwidth, j - kBandwidth}); k < j; ++k)
          s -= l(i, k) * std::conj(l(j, k)) * d(k);
        l(i, j) = s / dj;
      }
    }
  }

  CVec solve(CVec x) const {
    const int n = static_cast<int>(d.size());
    for (int i = 0; i < n; ++i)
      for (int k = std::max(0, i - kBandwidth); k < i; ++k)
        x(i) -= l(i, k) * x(k);
    x.array() /= d.array();
    for (int i = n - 1; i >= 0; --i)
      for (int k = i + 1; k <= std::min(n - 1, i + kBandwidth); ++k)
        x(i) -= std::conj(l(k, i)) * x(k);
    return x;
  }

  CMat inverse() const {
    const int n = static_cast<int>(d.size());
    CMat inv(n, n);
    for (int j = 0; j < n; ++j) inv.col(j) = solve(CVec::Unit(n, j));
    return inv;
  }
};

CMat banded_part(const CMat& a) {
  const int n = static_cast<int>(a.rows());
  CMat b = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    b(i, i) = a(i, i).real();
    for (int j = std::max(0, i - kBandwidth); j < i; ++j) {
      b(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
      b(j, i) = std::conj(b(i, j));
    }
  }
  return b;
}

// Noise-weighted Gram matrices and right-hand sides; the stacked model is
// block-diagonal, so the two coefficient blocks never mix inside Module A.
struct LmmseCache {
  int m = 0;
  CMat gram_r, gram_c;  // F^H F / noise_var per block
  CVec rhs_r, rhs_c;    // F^H y / noise_var per block
};

LmmseCache build_lmmse_cache(const MeasurementOperator& op,
                             const Observation& obs) {
  require(obs.y_r.size() == op.f_r.rows() && obs.y_c.size() == op.f_c.rows(),
          "lmmse_update: observation/operator row mismatch");
  require(obs.noise_var_r > 0.0 && obs.noise_var_c > 0.0,
          "lmmse_update: noise variances must be positive");
  LmmseCache c;
  c.m = op.m;
  c.gram_r = (op.f_r.adjoint() * op.f_r) / obs.noise_var_r;
  c.gram_c = (op.f_c.adjoint() * op.f_c) / obs.noise_var_c;
  c.rhs_r = (op.f_r.adjoint() * obs.y_r) / obs.noise_var_r;
  c.rhs_c = (op.f_c.adjoint() * obs.y_c) / obs.noise_var_c;
  return c;
}

void solve_block_exact(const CMat& gram, const CVec& rhs, const CVec& pri_mean,
                       const RVec& pri_var, CVec* mean, RVec* var) {
  CMat vinv = gram;
  vinv.diagonal() += pri_var.cwiseInverse().cast<cplx>();
  Eigen::LLT<CMat> llt(vinv);
  if (llt.info() != Eigen::Success)
    throw NumericalError("lmmse_update: singular information matrix");
  const CVec b = rhs + (pri_mean.array() / pri_var.cast<cplx>().array()).matrix();
  *mean = llt.solve(b);
  const CMat cov = llt.solve(CMat::Identity(gram.rows(), gram.cols()));
  *var = cov.diagonal().real();
}

void solve_block_banded(const CMat& gram, const CVec& rhs,
                        const CVec& pri_mean, const RVec& pri_var,
                        bool printed_form, CVec* mean, RVec* var) {
  const int n = static_cast<int>(gram.rows());
  CMat vinv = gram;
  vinv.diagonal() += pri_var.cwiseInverse().cast<cplx>();
  BandedLdl ldl;
  const CMat band = banded_part(vinv);
  ldl.factor(band);
  const CMat s = ldl.inverse();
  const CVec b = rhs + (pri_mean.array() / pri_var.cast<cplx>().array()).matrix();

  if (printed_form) {
    // Literal transcription of the uncorrected expansion: 2*B - S*Vinv*S.
    const CMat vpost = 2.0 * band - s * (vinv * s);
    *mean = vpost * b;
    *var = vpost.diagonal().real();
  } else {
    // Corrected first-order expansion of Vinv^{-1} around the banded part:
    // 2*S - S*Vinv*S.
    const CVec sb = s * b;
    *mean = 2.0 * sb - s * (vinv * sb);
    const CMat t = vinv * s;
    var->resize(n);
    for (int i = 0; i < n; ++i)
      (*var)(i) = 2.0 * s(i, i).real() - (s.row(i) * t.col(i)).value().real();
  }
  // The truncated expansion can undershoot; keep the belief usable.
  *var = var->cwiseMax(1e-12 * pri_var);
}

GaussianBelief lmmse_with_cache(const LmmseCache& cache,
                                const GaussianBelief& prior, LmmseVariant mode,
                                bool printed_form) {
  prior.validate();
  const int m = cache.m;
  require(prior.mean.size() == 2 * m, "lmmse_update: prior must be length 2M");

  GaussianBelief post;
  post.mean.resize(2 * m);
  post.var.resize(2 * m);

  if (mode == LmmseVariant::PoApprox) {
    // Scalar-variance approximation: F^H R^{-1} F ~ (tr/2M) I and the prior
    // variance collapsed to its average.
    const double gbar =
        (cache.gram_r.trace().real() + cache.gram_c.trace().real()) /
        (2.0 * m);
    const double vbar = prior.var.mean();
    const double vpost = 1.0 / (gbar + 1.0 / vbar);
    CVec rhs(2 * m);
    rhs << cache.rhs_r, cache.rhs_c;
    post.mean = vpost * (rhs + prior.mean / vbar);
    post.var.setConstant(vpost);
    return post;
  }

  CVec mr, mc;
  RVec vr, vc;
  const auto solve = [&](const CMat& gram, const CVec& rhs, int off, CVec* mm,
                         RVec* vv) {
    if (mode == LmmseVariant::Exact)
      solve_block_exact(gram, rhs, prior.mean.segment(off, m),
                        prior.var.segment(off, m), mm, vv);
    else
      solve_block_banded(gram, rhs, prior.mean.segment(off, m),
                         prior.var.segment(off, m), printed_form, mm, vv);
  };
  solve(cache.gram_r, cache.rhs_r, 0, &mr, &vr);
  solve(cache.gram_c, cache.rhs_c, m, &mc, &vc);
  post.mean << mr, mc;
  post.var << vr, vc;
  return post;
}

}  // namespace

GaussianBelief lmmse_update(const MeasurementOperator& op,
                            const Observation& obs,
                            const GaussianBelief& prior, LmmseVariant mode,
                            bool banded_printed_form) {
  return lmmse_with_cache(build_lmmse_cache(op, obs), prior, mode,
                          banded_printed_form);
}

GaussianBelief extrinsic(const GaussianBelief& posterior,
                         const GaussianBelief& prior,
                         const RVec& var_ceiling) {
  posterior.validate();
  prior.validate();
  require(posterior.mean.size() == prior.mean.size() &&
              var_ceiling.size() == prior.mean.size(),
          "extrinsic: size mismatch");
  const int n = static_cast<int>(prior.mean.size());
  GaussianBelief ext;
  ext.mean.resize(n);
  ext.var.resize(n);
  for (int i = 0; i < n; ++i) {
    const double prec = 1.0 / posterior.var(i) - 1.0 / prior.var(i);
    ext.var(i) =
        prec > 1.0 / var_ceiling(i) ? 1.0 / prec : var_ceiling(i);
    ext.mean(i) = ext.var(i) * (posterior.mean(i) / posterior.var(i) -
                                prior.mean(i) / prior.var(i));
  }
  return ext;
}

GaussianBelief extrinsic(const GaussianBelief& posterior,
                         const GaussianBelief& prior, double var_ceiling) {
  return extrinsic(posterior, prior,
                   RVec::Constant(prior.mean.size(), var_ceiling));
}

void module_b_pass(const GaussianBelief& ext_from_a, const HmmParams& params,
                   GaussianBelief* posterior, SupportPosterior* support) {
  ext_from_a.validate();
  params.validate();
  const int m = static_cast<int>(ext_from_a.mean.size()) / 2;
  require(2 * m == ext_from_a.mean.size(),
          "module_b_pass: belief must be length 2M");

  // Slab-vs-spike log odds of the virtual AWGN observation of each
  // coefficient: log CN(x; 0, v + slab) - log CN(x; 0, v).
  const auto slab_llr = [](cplx x, double v, double slab) {
    return std::norm(x) * slab / (v * (v + slab)) - std::log1p(slab / v);
  };
  // Branch evidence lifted to the shared chain through the conditional
  // activity probability rho: s = 0 forces the branch off.
  const auto lift = [](double pi, double rho) {
    const double num = rho * pi + (1.0 - rho) * (1.0 - pi);
    return clamp_prob(num / (num + (1.0 - pi)));
  };
  const auto combine = [](double a, double b) {
    const double p1 = a * b, p0 = (1.0 - a) * (1.0 - b);
    return clamp_prob(p1 / (p1 + p0));
  };

  RVec llr_r(m), llr_c(m), pis_r(m), pis_c(m), node(m);
  for (int i = 0; i < m; ++i) {
    llr_r(i) = slab_llr(ext_from_a.mean(i), ext_from_a.var(i), params.var_r);
    llr_c(i) = slab_llr(ext_from_a.mean(m + i), ext_from_a.var(m + i),
                        params.var_c);
    pis_r(i) = lift(clamp_prob(sigmoid(llr_r(i))), params.rho_r);
    pis_c(i) = lift(clamp_prob(sigmoid(llr_c(i))), params.rho_c_cond);
    node(i) = combine(pis_r(i), pis_c(i));
  }

  // Forward-backward over the activity chain. gamma_f(i) excludes node i's
  // own evidence; gamma_b(i) is the normalized backward message into node i.
  const double rho01 = params.rho01, rho10 = params.rho10;
  const double rho00 = 1.0 - rho01, rho11 = 1.0 - rho10;
  RVec gf(m), gb(m);
  gf(0) = params.lambda();
  for (int i = 1; i < m; ++i) {
    const double g = gf(i - 1), p = node(i - 1);
    gf(i) = clamp_prob((rho11 * g * p + rho01 * (1.0 - g) * (1.0 - p)) /
                       (g * p + (1.0 - g) * (1.0 - p)));
  }
  gb(m - 1) = 0.5;
  for (int i = m - 2; i >= 0; --i) {
    const double t =
        (1.0 / node(i + 1) - 1.0) * (1.0 / gb(i + 1) - 1.0);
    gb(i) = clamp_prob((rho10 * t + rho11) /
                       ((rho00 + rho10) * t + rho01 + rho11));
  }

  // Chain message back to one branch combines the chain with the *other*
  // branch, then steps down through the conditional probability.
  const auto branch_out = [&](int i, double other_pis, double rho) {
    const double p1 = gf(i) * gb(i) * other_pis;
    const double p0 = (1.0 - gf(i)) * (1.0 - gb(i)) * (1.0 - other_pis);
    return clamp_prob(rho * clamp_prob(p1 / (p1 + p0)));
  };

  posterior->mean.resize(2 * m);
  posterior->var.resize(2 * m);
  support->pi_r.resize(m);
  support->pi_c.resize(m);
  const auto moments = [&](int idx, double llr_in, double pi_out, double slab,
                           double* alpha_out) {
    const cplx x = ext_from_a.mean(idx);
    const double v = ext_from_a.var(idx);
    const double alpha = std::max(
        sigmoid(llr_in + std::log(pi_out / (1.0 - pi_out))), kProbFloor);
    const cplx mu = x * slab / (v + slab);
    const double vhat = v * slab / (v + slab);
    posterior->mean(idx) = alpha * mu;
    posterior->var(idx) =
        alpha * vhat + alpha * (1.0 - alpha) * std::norm(mu);
    *alpha_out = alpha;
  };
  for (int i = 0; i < m; ++i) {
    moments(i, llr_r(i), branch_out(i, pis_c(i), params.rho_r), params.var_r,
            &support->pi_r(i));
    moments(m + i, llr_c(i), branch_out(i, pis_r(i), params.rho_c_cond),
            params.var_c, &support->pi_c(i));
  }
}

EstepResult run_estep(const MeasurementOperator& op, const Observation& obs,
                      const HmmParams& params, const EstepConfig& config) {
  config.validate();
  params.validate();
  const int m = op.m;
  const LmmseCache cache = build_lmmse_cache(op, obs);

  RVec slab(2 * m), ceiling(2 * m);
  slab.head(m).setConstant(params.var_r);
  slab.tail(m).setConstant(params.var_c);
  ceiling = kExtVarCeilingFactor * slab;

  GaussianBelief prior_a;
  prior_a.mean = CVec::Zero(2 * m);
  prior_a.var.resize(2 * m);
  prior_a.var.head(m).setConstant(params.lambda() * params.rho_r *
                                  params.var_r);
  prior_a.var.tail(m).setConstant(params.lambda() * params.rho_c_cond *
                                  params.var_c);

  const auto damp = [&](const GaussianBelief& fresh, GaussianBelief* state,
                        bool first) {
    if (first || config.damping == 1.0) {
      *state = fresh;
      return;
    }
    state->mean = config.damping * fresh.mean +
                  (1.0 - config.damping) * state->mean;
    state->var = config.damping * fresh.var +
                 (1.0 - config.damping) * state->var;
  };

  EstepResult res;
  GaussianBelief ext_a, ext_b;
  CVec prev_mean = CVec::Zero(2 * m);
  for (int it = 1; it <= config.i_in; ++it) {
    res.iterations_used = it;
    const GaussianBelief post_a = lmmse_with_cache(
        cache, prior_a, config.variant, config.banded_printed_form);
    damp(extrinsic(post_a, prior_a, ceiling), &ext_a, it == 1);
    module_b_pass(ext_a, params, &res.belief, &res.support);
    damp(extrinsic(res.belief, ext_a, ceiling), &ext_b, it == 1);
    prior_a = ext_b;

    const double delta = (res.belief.mean - prev_mean).norm();
    if (it >= 2 && delta <= config.tol * std::max(1.0, prev_mean.norm())) {
      res.converged = true;
      break;
    }
    prev_mean = res.belief.mean;
  }
  return res;
}

}  // namespace isac

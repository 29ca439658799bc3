#include "isac/oracle.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>

namespace isac {

namespace {

// The five support triples (s; s_r, s_c) with nonzero prior mass. s = 0
// forces both conditionals off, so (0;1,0), (0;0,1), (0;1,1) never occur.
constexpr int kTriples[5][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}};

double log_or_ninf(double p) {
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

// Log prior of one full configuration, -inf when impossible.
double config_log_prior(const std::vector<int>& code, const HmmParams& hp) {
  const double lambda = hp.lambda();
  double lp = 0.0;
  int prev_s = -1;
  for (std::size_t m = 0; m < code.size(); ++m) {
    const int s = kTriples[code[m]][0];
    const int sr = kTriples[code[m]][1];
    const int sc = kTriples[code[m]][2];
    double pf;
    if (m == 0)
      pf = s ? lambda : 1.0 - lambda;
    else if (prev_s == 0)
      pf = s ? hp.rho01 : 1.0 - hp.rho01;
    else
      pf = s ? 1.0 - hp.rho10 : hp.rho10;
    lp += log_or_ninf(pf);
    if (s) {
      lp += log_or_ninf(sr ? hp.rho_r : 1.0 - hp.rho_r);
      lp += log_or_ninf(sc ? hp.rho_c_cond : 1.0 - hp.rho_c_cond);
    }
    prev_s = s;
    if (!std::isfinite(lp)) return lp;
  }
  return lp;
}

struct ActiveSet {
  std::vector<int> idx;     // columns of F
  std::vector<double> var;  // slab variances
};

ActiveSet active_set(const std::vector<int>& code, int m,
                     const HmmParams& hp) {
  ActiveSet a;
  for (int mm = 0; mm < m; ++mm) {
    if (kTriples[code[mm]][1]) {
      a.idx.push_back(mm);
      a.var.push_back(hp.var_r);
    }
    if (kTriples[code[mm]][2]) {
      a.idx.push_back(m + mm);
      a.var.push_back(hp.var_c);
    }
  }
  return a;
}

}  // namespace

EnumeratedPosterior enumerate_posterior(const CMat& f, const CVec& y,
                                        const RVec& row_noise_var,
                                        const HmmParams& params) {
  params.validate();
  require(f.cols() % 2 == 0, "enumerate_posterior: F must have 2M columns");
  const int m = static_cast<int>(f.cols()) / 2;
  require(m >= 1 && m <= 6, "enumerate_posterior: only m <= 6 is enumerable");
  const int n = static_cast<int>(f.rows());
  require(y.size() == n && row_noise_var.size() == n,
          "enumerate_posterior: row count mismatch");
  require((row_noise_var.array() > 0.0).all(),
          "enumerate_posterior: noise variances must be positive");

  // Woodbury in active-coordinate space: with K = D_A^{-1} + F_A^H R^{-1} F_A,
  //   log det(F_A D_A F_A^H + R) = log det R + sum log d + log det K,
  //   y^H Sigma^{-1} y            = y^H R^{-1} y - z_A^H K^{-1} z_A,
  //   x_A | y ~ CN(K^{-1} z_A, K^{-1}).
  const RVec rinv = row_noise_var.cwiseInverse();
  const CMat g = f.adjoint() * rinv.asDiagonal() * f;
  const CVec z = f.adjoint() * (rinv.asDiagonal() * y);
  const double c0 = (y.array().abs2() * rinv.array()).sum();
  const double base = -n * std::log(kPi) -
                      row_noise_var.array().log().sum() - c0;

  std::int64_t n_cfg = 1;
  for (int i = 0; i < m; ++i) n_cfg *= 5;

  std::vector<int> code(m);
  const auto decode = [&](std::int64_t c) {
    for (int mm = 0; mm < m; ++mm) {
      code[mm] = static_cast<int>(c % 5);
      c /= 5;
    }
  };

  const auto config_stats = [&](const ActiveSet& a, CVec* mu, RVec* var) {
    const int k = static_cast<int>(a.idx.size());
    if (k == 0) {
      if (mu) mu->resize(0);
      if (var) var->resize(0);
      return 0.0;  // log det K + quadratic correction, both empty
    }
    CMat kmat(k, k);
    CVec zk(k);
    for (int i = 0; i < k; ++i) {
      zk(i) = z(a.idx[i]);
      for (int j = 0; j < k; ++j) kmat(i, j) = g(a.idx[i], a.idx[j]);
      kmat(i, i) += 1.0 / a.var[i];
    }
    Eigen::LLT<CMat> llt(kmat);
    require(llt.info() == Eigen::Success,
            "enumerate_posterior: active-set system not positive definite");
    const CMat lfac = llt.matrixL();
    double logdet_k = 0.0;
    for (int i = 0; i < k; ++i) logdet_k += 2.0 * std::log(lfac(i, i).real());
    const CVec mu_k = llt.solve(zk);
    double slab = 0.0;
    for (double d : a.var) slab += std::log(d);
    if (mu) *mu = mu_k;
    if (var) {
      const CMat kinv = llt.solve(CMat::Identity(k, k));
      *var = kinv.diagonal().real();
    }
    return -slab - logdet_k + zk.dot(mu_k).real();
  };

  // Pass 1: log weight of every configuration.
  std::vector<double> lw(n_cfg);
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::int64_t c = 0; c < n_cfg; ++c) {
    decode(c);
    const double lp = config_log_prior(code, params);
    if (!std::isfinite(lp)) {
      lw[c] = lp;
      continue;
    }
    lw[c] = lp + base + config_stats(active_set(code, m, params), nullptr,
                                     nullptr);
    lmax = std::max(lmax, lw[c]);
  }
  require(std::isfinite(lmax), "enumerate_posterior: no feasible support");
  double sum = 0.0;
  for (std::int64_t c = 0; c < n_cfg; ++c)
    if (std::isfinite(lw[c])) sum += std::exp(lw[c] - lmax);
  const double lse = lmax + std::log(sum);

  // Pass 2: posterior marginals and spike-and-slab moments.
  EnumeratedPosterior post;
  post.p_r = RVec::Zero(m);
  post.p_c = RVec::Zero(m);
  post.p_s = RVec::Zero(m);
  post.x_mean = CVec::Zero(2 * m);
  RVec ex2 = RVec::Zero(2 * m);
  post.log_evidence = lse;
  for (std::int64_t c = 0; c < n_cfg; ++c) {
    if (!std::isfinite(lw[c])) continue;
    const double w = std::exp(lw[c] - lse);
    if (w == 0.0) continue;
    decode(c);
    for (int mm = 0; mm < m; ++mm) {
      post.p_s(mm) += w * kTriples[code[mm]][0];
      post.p_r(mm) += w * kTriples[code[mm]][1];
      post.p_c(mm) += w * kTriples[code[mm]][2];
    }
    const ActiveSet a = active_set(code, m, params);
    CVec mu;
    RVec var;
    config_stats(a, &mu, &var);
    for (std::size_t i = 0; i < a.idx.size(); ++i) {
      post.x_mean(a.idx[i]) += w * mu(static_cast<int>(i));
      ex2(a.idx[i]) +=
          w * (var(static_cast<int>(i)) + std::norm(mu(static_cast<int>(i))));
    }
  }
  post.x_var = ex2 - post.x_mean.cwiseAbs2();
  return post;
}

EnumeratedPosterior enumerate_posterior(const MeasurementOperator& op,
                                        const Observation& obs,
                                        const HmmParams& params) {
  const int nr = static_cast<int>(op.f_r.rows());
  const int nc = static_cast<int>(op.f_c.rows());
  CMat f = CMat::Zero(nr + nc, 2 * op.m);
  f.topLeftCorner(nr, op.m) = op.f_r;
  f.bottomRightCorner(nc, op.m) = op.f_c;
  CVec y(nr + nc);
  y << obs.y_r, obs.y_c;
  RVec noise(nr + nc);
  noise.head(nr).setConstant(obs.noise_var_r);
  noise.tail(nc).setConstant(obs.noise_var_c);
  return enumerate_posterior(f, y, noise, params);
}

double finite_diff_scalar(const std::function<double(double)>& fn, double x,
                          double step) {
  return (fn(x + step) - fn(x - step)) / (2.0 * step);
}

CVec finite_diff_cvec(const std::function<CVec(double)>& fn, double x,
                      double step) {
  return (fn(x + step) - fn(x - step)) / (2.0 * step);
}

RVec finite_diff_gradient(const std::function<double(const RVec&)>& fn,
                          const RVec& x, double step) {
  RVec grad(x.size());
  RVec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + step;
    const double hi = fn(xp);
    xp(i) = x(i) - step;
    const double lo = fn(xp);
    xp(i) = x(i);
    grad(i) = (hi - lo) / (2.0 * step);
  }
  return grad;
}

RMat score_covariance(const AoaPartition& partition, const PilotSet& pilots,
                      double noise_var_r, double noise_var_c, int n_samples,
                      std::uint64_t seed) {
  partition.validate();
  require(n_samples > 0, "score_covariance: need at least one sample");
  const int m = pilots.m();
  const CMat dps = pilots.dps(Stage::Both);
  const int nr = partition.n_r(), ns = partition.n_s(), nc = partition.n_c();
  const int nt = nr + ns + nc;

  // Noiseless mean of the stacked radar rows as a function of the angle
  // vector (gains held at the partition's values).
  const auto radar_mean = [&](const RVec& th) {
    CMat h = CMat::Zero(m, m);
    for (int k = 0; k < nr + ns; ++k) {
      const CVec a = steering_vector(th(k), m);
      const cplx gain = k < nr ? partition.xr_r(k) : partition.xr_s(k - nr);
      h += gain * a * a.adjoint();
    }
    CVec mu(dps.cols() * m);
    for (int p = 0; p < dps.cols(); ++p) mu.segment(p * m, m) = h * dps.col(p);
    return mu;
  };
  const auto comm_mean = [&](const RVec& th) {
    CVec hc = CVec::Zero(m);
    for (int l = 0; l < ns + nc; ++l) {
      const cplx gain =
          l < ns ? partition.xc_s(l) : partition.xc_c(l - ns);
      hc += gain * steering_vector(th(nr + l), m);
    }
    CVec mu(pilots.q() * m);
    for (int qq = 0; qq < pilots.q(); ++qq)
      mu.segment(qq * m, m) = pilots.up(qq) * hc;
    return mu;
  };

  const RVec theta0 = partition.all_theta();
  const double step = 1e-6;
  CMat jac_r(dps.cols() * m, nt), jac_c(pilots.q() * m, nt);
  RVec th = theta0;
  for (int i = 0; i < nt; ++i) {
    th(i) = theta0(i) + step;
    const CVec rp = radar_mean(th), cp = comm_mean(th);
    th(i) = theta0(i) - step;
    jac_r.col(i) = (rp - radar_mean(th)) / (2.0 * step);
    jac_c.col(i) = (cp - comm_mean(th)) / (2.0 * step);
    th(i) = theta0(i);
  }

  // score_i = (2/var_r) Re[(d mu_r/d theta_i)^H n_r] + comm analogue; the
  // score has zero mean, so the raw second moment is the covariance.
  Rng rng(seed);
  RMat acc = RMat::Zero(nt, nt);
  RVec score(nt);
  for (int s = 0; s < n_samples; ++s) {
    const CVec n_r = cnormal_vec(rng, jac_r.rows(), noise_var_r);
    const CVec n_c = cnormal_vec(rng, jac_c.rows(), noise_var_c);
    for (int i = 0; i < nt; ++i)
      score(i) = (2.0 / noise_var_r) * jac_r.col(i).dot(n_r).real() +
                 (2.0 / noise_var_c) * jac_c.col(i).dot(n_c).real();
    acc += score * score.transpose();
  }
  return acc / static_cast<double>(n_samples);
}

}  // namespace isac

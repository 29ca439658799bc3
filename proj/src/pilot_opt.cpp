#include "isac/pilot_opt.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "isac/array.hpp"

namespace isac {

double rank_surrogate(const CMat& v, double eps) {
  require(eps > 0.0, "rank_surrogate: eps must be positive");
  require(v.rows() == v.cols() && v.rows() >= 1, "rank_surrogate: not square");
  Eigen::SelfAdjointEigenSolver<CMat> es(v, Eigen::EigenvaluesOnly);
  require(es.info() == Eigen::Success, "rank_surrogate: eigenvalues failed");
  double acc = 0.0;
  for (int i = 0; i < v.rows(); ++i)
    acc += std::log1p(std::max(0.0, es.eigenvalues()(i)) / eps);
  return acc / std::log1p(1.0 / eps);
}

void PilotCovariances::validate() const {
  require(!v_mats.empty(), "pilot covariances: empty");
  require(power_budget > 0.0 && epsilon > 0.0,
          "pilot covariances: budget and epsilon must be positive");
  for (const CMat& v : v_mats) {
    require(v.rows() == v.cols() && v.allFinite(),
            "pilot covariances: bad matrix");
    require((v - v.adjoint()).norm() <= 1e-9 * (1.0 + v.norm()),
            "pilot covariances: not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMat> es(v, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-9 * power_budget,
            "pilot covariances: not PSD");
    require(v.trace().real() <= power_budget * (1.0 + 1e-9),
            "pilot covariances: trace exceeds budget");
  }
}

void PilotOptConfig::validate() const {
  require(p2 >= 1, "pilot config: need at least one stage-two pilot");
  require(power > 0.0, "pilot config: power budget must be positive");
  require(epsilon > 0.0, "pilot config: epsilon must be positive");
  require(i_max >= 1, "pilot config: iteration cap must be positive");
  require(tol > 0.0 && subproblem_tol > 0.0,
          "pilot config: tolerances must be positive");
  require(noise_var_r > 0.0 && noise_var_c > 0.0,
          "pilot config: noise variances must be positive");
}

namespace {

// d(a a^H)/d theta for each radar-visible angle.
std::vector<CMat> outer_derivatives(const AoaPartition& partition, int m) {
  const int k = partition.n_radar();
  const RVec theta = partition.all_theta().head(k);
  std::vector<CMat> b(k);
  for (int i = 0; i < k; ++i) {
    const CVec a = steering_vector(theta(i), m);
    const CVec da = steering_derivative(theta(i), m);
    b[i] = da * a.adjoint() + a * da.adjoint();
  }
  return b;
}

CVec radar_gains(const AoaPartition& partition) {
  CVec g(partition.n_radar());
  g << partition.xr_r, partition.xr_s;
  return g;
}

}  // namespace

ConvexSubproblem build_subproblem(const AoaPartition& partition,
                                  const PilotSet& stage1_pilots,
                                  const PilotOptConfig& cfg,
                                  const std::vector<CMat>* lin_point,
                                  double eps) {
  partition.validate();
  cfg.validate();
  require(partition.n_radar() >= 1,
          "pilot design: no radar-visible angles to optimize for");
  const int m = static_cast<int>(stage1_pilots.dp1.rows());
  const int k = partition.n_radar();

  ConvexSubproblem sub;
  sub.n_t = m;
  sub.p2 = cfg.p2;
  sub.k = k;
  sub.c_eff = efim_from_covariances(partition, stage1_pilots, {},
                                    cfg.noise_var_r, cfg.noise_var_c)
                  .j_eff;
  sub.trace_bound = 1.0;

  // EFIM entry (i, j) gains 2/sigma_r^2 Re{conj(x_i) x_j tr(B_i^H B_j W)}
  // from the aggregate stage-two covariance W; variables are normalized by
  // the power budget, so the budget multiplies the gain.
  const std::vector<CMat> b = outer_derivatives(partition, m);
  const CVec g = radar_gains(partition);
  const double scale = 2.0 / cfg.noise_var_r * cfg.power;
  sub.gain.resize(k * (k + 1) / 2);
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) {
      const CMat gij =
          scale * std::conj(g(i)) * g(j) * (b[i].adjoint() * b[j]);
      sub.gain[upper_pair_index(i, j, k)] = 0.5 * (gij + gij.adjoint());
    }

  if (lin_point) {
    require(static_cast<int>(lin_point->size()) == cfg.p2,
            "pilot design: linearization point count mismatch");
    const double log_gain = std::log1p(1.0 / eps);
    sub.rank_d.resize(cfg.p2);
    sub.rank_c.resize(cfg.p2);
    for (int p = 0; p < cfg.p2; ++p) {
      const CMat& vi = (*lin_point)[p];
      Eigen::LLT<CMat> llt(vi + eps * CMat::Identity(m, m));
      require(llt.info() == Eigen::Success,
              "pilot design: linearization point not PSD");
      sub.rank_d[p] = llt.solve(CMat::Identity(m, m));
      sub.rank_d[p] = 0.5 * (sub.rank_d[p] + sub.rank_d[p].adjoint().eval());
      const double budget = (sub.rank_d[p] * vi).trace().real() +
                            (1.0 - rank_surrogate(vi, eps)) * log_gain;
      sub.rank_c(p) = std::max(budget, 1e-10);
    }
  }
  return sub;
}

namespace {

// Dominant eigenvector of the quadratic form the radar EFIM diagonal traces
// against the aggregate covariance; beams along it maximize information for
// a single dominant angle and give a strictly feasible near-rank-1 start.
CVec dominant_beam(const AoaPartition& partition, int m) {
  const std::vector<CMat> b = outer_derivatives(partition, m);
  const CVec g = radar_gains(partition);
  CMat acc = CMat::Zero(m, m);
  for (size_t i = 0; i < b.size(); ++i)
    acc += std::norm(g(static_cast<int>(i))) * (b[i].adjoint() * b[i]);
  Eigen::SelfAdjointEigenSolver<CMat> es(acc);
  require(es.info() == Eigen::Success, "pilot design: beam seed failed");
  return es.eigenvectors().col(m - 1);
}

CVec project_rank_one(const CMat& v, double power) {
  Eigen::SelfAdjointEigenSolver<CMat> es(v);
  require(es.info() == Eigen::Success, "pilot design: projection failed");
  CVec u = es.eigenvectors().col(v.rows() - 1);
  for (int i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) > 1e-12) {
      u *= std::conj(u(i)) / std::abs(u(i));
      break;
    }
  }
  return std::sqrt(power) * u;
}

double min_efim_eigenvalue(const AoaPartition& partition,
                           const PilotSet& stage1_pilots, const CMat& vectors,
                           const PilotOptConfig& cfg) {
  std::vector<CMat> covs(vectors.cols());
  for (int p = 0; p < vectors.cols(); ++p)
    covs[p] = vectors.col(p) * vectors.col(p).adjoint();
  const EfimBundle bundle = efim_from_covariances(
      partition, stage1_pilots, covs, cfg.noise_var_r, cfg.noise_var_c);
  Eigen::SelfAdjointEigenSolver<RMat> es(bundle.j_eff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Beam sets considered as starting points for the rank-aware loop. Linearizing
// the rank surrogate at a covariance pins the next iterate near its support,
// so the loop inherits the basin of its seed; starting from the best available
// rank-1 design — rather than a fixed heuristic — decides the quality of the
// final design.
std::vector<std::vector<CVec>> seed_candidates(const AoaPartition& partition,
                                               const PilotSet& stage1_pilots,
                                               const PilotOptConfig& cfg,
                                               int m) {
  std::vector<std::vector<CVec>> candidates;
  candidates.push_back(
      std::vector<CVec>(cfg.p2, dominant_beam(partition, m)));

  // One relaxed solve exposes where the unconstrained optimum puts power.
  // Its per-pilot dominant eigenvectors replicate the plain rank-1
  // projection, and the aggregate's leading eigenvectors spread the pilots
  // across directions when the optimum is genuinely higher rank.
  try {
    const ConvexSubproblem relaxed =
        build_subproblem(partition, stage1_pilots, cfg, nullptr, cfg.epsilon);
    const SubproblemSolution rel =
        solve_subproblem(relaxed, cfg.subproblem_tol, nullptr);

    std::vector<CVec> projected(cfg.p2);
    CMat aggregate = CMat::Zero(m, m);
    for (int p = 0; p < cfg.p2; ++p) {
      projected[p] = project_rank_one(rel.v_mats[p], 1.0);
      aggregate += rel.v_mats[p];
    }
    candidates.push_back(std::move(projected));

    Eigen::SelfAdjointEigenSolver<CMat> es(aggregate);
    if (es.info() == Eigen::Success) {
      int significant = 0;
      const double top = es.eigenvalues()(m - 1);
      for (int i = 0; i < m; ++i)
        if (es.eigenvalues()(m - 1 - i) > 1e-8 * std::max(top, 1e-300))
          ++significant;
      if (significant >= 1) {
        std::vector<CVec> diverse(cfg.p2);
        for (int p = 0; p < cfg.p2; ++p)
          diverse[p] = es.eigenvectors().col(m - 1 - (p % significant));
        candidates.push_back(std::move(diverse));
      }
    }
  } catch (const std::exception&) {
    // The relaxation can fail on degenerate scenes; the quadratic-form beam
    // above still seeds the loop.
  }
  return candidates;
}

PilotOptResult finalize(const AoaPartition& partition,
                        const PilotSet& stage1_pilots,
                        const PilotOptConfig& cfg, std::vector<CMat> vtil,
                        PilotOptResult result) {
  const int m = static_cast<int>(vtil[0].rows());
  result.vectors.resize(m, cfg.p2);
  result.covariances.v_mats.resize(cfg.p2);
  result.covariances.power_budget = cfg.power;
  result.covariances.epsilon = cfg.epsilon;
  for (int p = 0; p < cfg.p2; ++p) {
    result.covariances.v_mats[p] = cfg.power * vtil[p];
    result.vectors.col(p) = project_rank_one(vtil[p], cfg.power);
  }
  result.lambda_relaxed = result.lambda_trace.back();
  result.lambda_projected =
      min_efim_eigenvalue(partition, stage1_pilots, result.vectors, cfg);
  return result;
}

}  // namespace

PilotOptResult optimize_pilots(const AoaPartition& partition,
                               const PilotSet& stage1_pilots,
                               const PilotOptConfig& cfg) {
  cfg.validate();
  const int m = static_cast<int>(stage1_pilots.dp1.rows());

  const double eps0 =
      cfg.continuation ? 1e-1 : cfg.epsilon;  // first-iteration sharpness

  // Strictly feasible near-rank-1 start: the identity start satisfies the
  // power budget but lands far outside the rank row at practical sizes. The
  // ridge keeps the start positive definite and is shrunk until the rank
  // surrogate sits safely below one.
  const CVec beam = dominant_beam(partition, m);
  CMat v0;
  double ridge = 1e-3 * eps0;
  bool seeded = false;
  for (int tries = 0; tries < 60; ++tries) {
    v0 = 0.9 * beam * beam.adjoint() + ridge * CMat::Identity(m, m);
    if (rank_surrogate(v0, eps0) < 0.995 && v0.trace().real() < 1.0) {
      seeded = true;
      break;
    }
    ridge *= 0.25;
  }
  if (!seeded)
    throw NumericalError("pilot optimization: no feasible start found");
  std::vector<CMat> vtil(cfg.p2, v0);

  PilotOptResult result;
  RMat j_prev;
  bool have_prev = false;
  for (int it = 0; it < cfg.i_max; ++it) {
    double eps = cfg.epsilon;
    if (cfg.continuation) {
      const double frac =
          cfg.i_max > 1 ? static_cast<double>(it) / (cfg.i_max - 1) : 1.0;
      eps = std::pow(10.0, -1.0 - 3.0 * frac);
    }
    const ConvexSubproblem sub =
        build_subproblem(partition, stage1_pilots, cfg, &vtil, eps);
    // The previous optimum hugs the trace and rank rows; shrinking it 10%
    // buys uniform slack for the barrier restart without moving the optimum
    // (the subproblem is convex, the start only affects solve effort).
    std::vector<CMat> warm = vtil;
    for (CMat& wv : warm) {
      wv *= 0.9;
      wv += 1e-9 * CMat::Identity(m, m);
    }
    SubproblemSolution sol;
    try {
      sol = solve_subproblem(sub, cfg.subproblem_tol, &warm);
    } catch (const std::exception& e) {
      throw NumericalError("pilot optimization failed at iteration " +
                           std::to_string(it) + ": " + e.what());
    }
    vtil = std::move(sol.v_mats);
    result.lambda_trace.push_back(sol.lambda);
    result.iterations = it + 1;

    const RMat j_now = sub.efim(vtil);
    Eigen::SelfAdjointEigenSolver<RMat> es(j_now, Eigen::EigenvaluesOnly);
    double max_trace = 0.0;
    for (const CMat& v : vtil)
      max_trace = std::max(max_trace, v.trace().real());
    result.trace.push_back({it, sol.lambda,
                            es.eigenvalues().minCoeff() - sol.lambda,
                            max_trace});

    if (have_prev &&
        (j_now - j_prev).norm() <= cfg.tol * std::max(1.0, j_prev.norm())) {
      result.converged = true;
      break;
    }
    j_prev = j_now;
    have_prev = true;
  }
  return finalize(partition, stage1_pilots, cfg, std::move(vtil),
                  std::move(result));
}

PilotOptResult sdr_baseline(const AoaPartition& partition,
                            const PilotSet& stage1_pilots,
                            const PilotOptConfig& cfg) {
  cfg.validate();
  const ConvexSubproblem sub =
      build_subproblem(partition, stage1_pilots, cfg, nullptr, cfg.epsilon);
  SubproblemSolution sol;
  try {
    sol = solve_subproblem(sub, cfg.subproblem_tol, nullptr);
  } catch (const std::exception& e) {
    throw NumericalError(std::string("pilot relaxation failed: ") + e.what());
  }
  PilotOptResult result;
  result.lambda_trace.push_back(sol.lambda);
  result.iterations = 1;
  result.converged = true;
  double max_trace = 0.0;
  for (const CMat& v : sol.v_mats)
    max_trace = std::max(max_trace, v.trace().real());
  Eigen::SelfAdjointEigenSolver<RMat> es(sub.efim(sol.v_mats),
                                         Eigen::EigenvaluesOnly);
  result.trace.push_back(
      {0, sol.lambda, es.eigenvalues().minCoeff() - sol.lambda, max_trace});
  return finalize(partition, stage1_pilots, cfg, std::move(sol.v_mats),
                  std::move(result));
}

}  // namespace isac

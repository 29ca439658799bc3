#include "isac/fim.hpp"

#include <Eigen/Eigenvalues>

namespace isac {

RVec AoaPartition::all_theta() const {
  RVec all(n_total());
  all << theta_r, theta_s, theta_c;
  return all;
}

void AoaPartition::validate() const {
  require(xr_r.size() == theta_r.size() && xr_s.size() == theta_s.size(),
          "AoaPartition: radar gain/angle size mismatch");
  require(xc_s.size() == theta_s.size() && xc_c.size() == theta_c.size(),
          "AoaPartition: comm gain/angle size mismatch");
  const RVec all = all_theta();
  for (int i = 0; i < all.size(); ++i)
    for (int j = i + 1; j < all.size(); ++j)
      require(all(i) != all(j), "AoaPartition: duplicate angle across sets");
}

AoaPartition AoaPartition::from_detections(const RVec& theta, const RVec& p_r,
                                           const RVec& p_c, const CVec& x_r,
                                           const CVec& x_c, double threshold) {
  std::vector<double> tr, ts, tc;
  std::vector<cplx> grr, grs, gcs, gcc;
  for (int m = 0; m < theta.size(); ++m) {
    // Detection is strict ">" on the threshold; near-zero posterior gains
    // carry no Fisher information and would only make blocks singular.
    const bool dr = p_r(m) > threshold && std::abs(x_r(m)) > 1e-12;
    const bool dc = p_c(m) > threshold && std::abs(x_c(m)) > 1e-12;
    if (dr && dc) {
      ts.push_back(theta(m));
      grs.push_back(x_r(m));
      gcs.push_back(x_c(m));
    } else if (dr) {
      tr.push_back(theta(m));
      grr.push_back(x_r(m));
    } else if (dc) {
      tc.push_back(theta(m));
      gcc.push_back(x_c(m));
    }
  }
  AoaPartition p;
  p.theta_r = Eigen::Map<const RVec>(tr.data(), tr.size());
  p.theta_s = Eigen::Map<const RVec>(ts.data(), ts.size());
  p.theta_c = Eigen::Map<const RVec>(tc.data(), tc.size());
  p.xr_r = Eigen::Map<const CVec>(grr.data(), grr.size());
  p.xr_s = Eigen::Map<const CVec>(grs.data(), grs.size());
  p.xc_s = Eigen::Map<const CVec>(gcs.data(), gcs.size());
  p.xc_c = Eigen::Map<const CVec>(gcc.data(), gcc.size());
  return p;
}

AoaPartition AoaPartition::from_scene(const SceneTruth& scene) {
  RVec pr(scene.m), pc(scene.m);
  for (int m = 0; m < scene.m; ++m) {
    pr(m) = scene.s_r(m) ? 1.0 : 0.0;
    pc(m) = scene.s_c(m) ? 1.0 : 0.0;
  }
  return from_detections(scene.theta, pr, pc, scene.x_r, scene.x_c, 0.5);
}

ChannelJacobians channel_jacobians(const AoaPartition& partition, int m) {
  partition.validate();
  ChannelJacobians jac;
  jac.dhr.setZero(partition.n_radar(), m * m);
  jac.dhc.setZero(partition.n_s() + partition.n_c(), m);

  // Radar rows: h^r = vec((H^r)^T), so the per-target derivative is the
  // transposed rank-2 matrix x_k (a'a^H + a a'^H).
  const RVec radar_theta = [&] {
    RVec t(partition.n_radar());
    t << partition.theta_r, partition.theta_s;
    return t;
  }();
  const CVec radar_gain = [&] {
    CVec g(partition.n_radar());
    g << partition.xr_r, partition.xr_s;
    return g;
  }();
  for (int k = 0; k < partition.n_radar(); ++k) {
    const CVec a = steering_vector(radar_theta(k), m);
    const CVec da = steering_derivative(radar_theta(k), m);
    CMat b = da * a.adjoint() + a * da.adjoint();
    CMat bt = b.transpose();
    jac.dhr.row(k) =
        radar_gain(k) * Eigen::Map<CVec>(bt.data(), bt.size()).transpose();
  }

  const RVec comm_theta = [&] {
    RVec t(partition.n_s() + partition.n_c());
    t << partition.theta_s, partition.theta_c;
    return t;
  }();
  const CVec comm_gain = [&] {
    CVec g(partition.n_s() + partition.n_c());
    g << partition.xc_s, partition.xc_c;
    return g;
  }();
  for (int l = 0; l < comm_theta.size(); ++l)
    jac.dhc.row(l) =
        comm_gain(l) * steering_derivative(comm_theta(l), m).transpose();
  return jac;
}

namespace {

// Mean Jacobian of the stacked observations: column i is d mu / d theta_i in
// the global order [theta_r; theta_s; theta_c], split into the radar rows
// (through psi_r) and comm rows (through u_mat).
struct MeanJacobians {
  CMat radar;  // PM x n_total
  CMat comm;   // QM x n_total
};

MeanJacobians mean_jacobians(const AoaPartition& part, const CMat& psi_r,
                             const CMat& u_mat, int m) {
  const ChannelJacobians jac = channel_jacobians(part, m);
  const int nr = part.n_r(), ns = part.n_s(), nc = part.n_c();
  MeanJacobians mj;
  mj.radar.setZero(psi_r.rows(), nr + ns + nc);
  mj.comm.setZero(u_mat.rows(), nr + ns + nc);
  for (int k = 0; k < nr + ns; ++k)
    mj.radar.col(k) = psi_r * jac.dhr.row(k).transpose();
  for (int l = 0; l < ns + nc; ++l)
    mj.comm.col(nr + l) = u_mat * jac.dhc.row(l).transpose();
  return mj;
}

RMat schur_efim(const RMat& j_full, int n_radar, int n_c) {
  if (n_c == 0) return j_full;
  const RMat j_cc = j_full.bottomRightCorner(n_c, n_c);
  Eigen::SelfAdjointEigenSolver<RMat> es(j_cc);
  const double emax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(emax, 1.0))
    throw NumericalError(
        "assemble_fim: singular pure-comm information block "
        "(unidentifiable pure-comm AoA)");
  const RMat j_xc = j_full.topRightCorner(n_radar, n_c);
  RMat eff = j_full.topLeftCorner(n_radar, n_radar) -
             j_xc * j_cc.ldlt().solve(j_xc.transpose());
  return 0.5 * (eff + eff.transpose());
}

CMat build_psi_r(const CMat& dps, int m) {
  const int p = static_cast<int>(dps.cols());
  CMat psi = CMat::Zero(p * m, m * m);
  for (int pp = 0; pp < p; ++pp)
    for (int i = 0; i < m; ++i)
      psi.block(pp * m + i, i * m, 1, m) = dps.col(pp).transpose();
  return psi;
}

CMat build_psi_c(const CVec& up, int m) {
  const CMat eye = CMat::Identity(m, m);
  CMat u = CMat::Zero(up.size() * m, m);
  for (int qq = 0; qq < up.size(); ++qq) u.block(qq * m, 0, m, m) = up(qq) * eye;
  return u;
}

}  // namespace

EfimBundle assemble_fim(const AoaPartition& partition, const PilotSet& pilots,
                        double noise_var_r, double noise_var_c) {
  partition.validate();
  require(noise_var_r > 0.0 && noise_var_c > 0.0,
          "assemble_fim: noise variances must be positive");
  const int m = pilots.m();

  EfimBundle b;
  b.n_r = partition.n_r();
  b.n_s = partition.n_s();
  b.n_c = partition.n_c();
  b.noise_var_r = noise_var_r;
  b.noise_var_c = noise_var_c;
  b.psi_r = build_psi_r(pilots.dps(Stage::Both), m);
  b.psi_c = build_psi_c(pilots.up, m);

  const MeanJacobians mj = mean_jacobians(partition, b.psi_r, b.psi_c, m);
  RMat j = (2.0 / noise_var_r) * (mj.radar.adjoint() * mj.radar).real() +
           (2.0 / noise_var_c) * (mj.comm.adjoint() * mj.comm).real();
  b.j_full = 0.5 * (j + j.transpose());
  b.j_eff = schur_efim(b.j_full, b.n_r + b.n_s, b.n_c);
  return b;
}

EfimBundle efim_from_covariances(const AoaPartition& partition,
                                 const PilotSet& stage1_pilots,
                                 const std::vector<CMat>& covariances,
                                 double noise_var_r, double noise_var_c) {
  partition.validate();
  require(noise_var_r > 0.0 && noise_var_c > 0.0,
          "efim_from_covariances: noise variances must be positive");
  const int m = stage1_pilots.m();
  const int nr = partition.n_r(), ns = partition.n_s(), nc = partition.n_c();
  const int nt = nr + ns + nc;

  // Aggregate downlink energy: stage-one vectors plus the lifted stage-two
  // covariances. The radar FIM depends on the pilots only through this W.
  CMat w = CMat::Zero(m, m);
  const CMat dp1 = stage1_pilots.dp1;
  for (int p = 0; p < dp1.cols(); ++p)
    w += dp1.col(p) * dp1.col(p).adjoint();
  for (const CMat& v : covariances) {
    require(v.rows() == m && v.cols() == m,
            "efim_from_covariances: covariance dimension mismatch");
    w += v;
  }

  const RVec radar_theta = [&] {
    RVec t(nr + ns);
    t << partition.theta_r, partition.theta_s;
    return t;
  }();
  const CVec radar_gain = [&] {
    CVec g(nr + ns);
    g << partition.xr_r, partition.xr_s;
    return g;
  }();
  std::vector<CMat> bmats(nr + ns);
  for (int k = 0; k < nr + ns; ++k) {
    const CVec a = steering_vector(radar_theta(k), m);
    const CVec da = steering_derivative(radar_theta(k), m);
    bmats[k] = da * a.adjoint() + a * da.adjoint();
  }

  RMat j = RMat::Zero(nt, nt);
  // Radar part: J_ij = (2/var) Re{ x_i^* x_j tr(B_i^H B_j W) }.
  for (int i = 0; i < nr + ns; ++i)
    for (int k = i; k < nr + ns; ++k) {
      const cplx t = (bmats[i].adjoint() * bmats[k] * w).trace();
      const double val =
          (2.0 / noise_var_r) * (std::conj(radar_gain(i)) * radar_gain(k) * t)
              .real();
      j(i, k) += val;
      j(k, i) = j(i, k);
    }
  // Comm part over [theta_s; theta_c]: J_ij = (2/var) Re{ x_i^* x_j
  // (U a'_i)^H (U a'_j) } = (2/var) Q Re{ x_i^* x_j a'_i^H a'_j }.
  const double q = static_cast<double>(stage1_pilots.q());
  const RVec comm_theta = [&] {
    RVec t(ns + nc);
    t << partition.theta_s, partition.theta_c;
    return t;
  }();
  const CVec comm_gain = [&] {
    CVec g(ns + nc);
    g << partition.xc_s, partition.xc_c;
    return g;
  }();
  for (int i = 0; i < ns + nc; ++i) {
    const CVec dai = steering_derivative(comm_theta(i), m);
    for (int k = i; k < ns + nc; ++k) {
      const CVec dak = steering_derivative(comm_theta(k), m);
      const double val =
          (2.0 / noise_var_c) * q *
          (std::conj(comm_gain(i)) * comm_gain(k) * dai.dot(dak)).real();
      j(nr + i, nr + k) += val;
      if (k != i) j(nr + k, nr + i) = j(nr + i, nr + k);
    }
  }

  EfimBundle b;
  b.n_r = nr;
  b.n_s = ns;
  b.n_c = nc;
  b.noise_var_r = noise_var_r;
  b.noise_var_c = noise_var_c;
  b.j_full = 0.5 * (j + j.transpose());
  b.j_eff = schur_efim(b.j_full, nr + ns, nc);
  return b;
}

RMat crb(const EfimBundle& bundle) {
  const RMat& j = bundle.j_eff;
  require(j.rows() > 0, "crb: empty EFIM");
  Eigen::SelfAdjointEigenSolver<RMat> es(j);
  const double emax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(emax, 1.0))
    throw NumericalError("crb: singular EFIM (unidentifiable configuration)");
  return j.ldlt().solve(RMat::Identity(j.rows(), j.cols()));
}

}  // namespace isac

#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "isac/fim.hpp"
#include "isac/oracle.hpp"

using namespace isac;

namespace {

PilotSet simple_pilots(int m, int p, int q, unsigned seed) {
  Rng rng = make_rng(seed);
  PilotSet pilots;
  pilots.dp1 = make_omni_dps(m, p, 1.0, rng);
  pilots.dp2 = CMat(m, 0);
  pilots.up = make_unit_modulus_ups(q, rng);
  pilots.power_budget = 1.0;
  return pilots;
}

AoaPartition three_path_partition() {
  AoaPartition part;
  part.theta_r = RVec::Constant(1, 0.3);
  part.theta_s = RVec::Constant(1, -0.5);
  part.theta_c = RVec::Constant(1, 0.8);
  part.xr_r = CVec::Constant(1, cplx(1.1, 0.2));
  part.xr_s = CVec::Constant(1, cplx(0.7, -0.4));
  part.xc_s = CVec::Constant(1, cplx(0.9, 0.1));
  part.xc_c = CVec::Constant(1, cplx(-0.6, 0.8));
  return part;
}

CMat random_psd(int m, Rng& rng) {
  const CMat g = cnormal_mat(rng, m, m);
  return g * g.adjoint() / m;
}

}  // namespace

TEST_SUITE("fim") {

TEST_CASE("a single broadside comm path carries pi^2 of information") {
  const int m = 2;
  PilotSet pilots = simple_pilots(m, 1, 1, 51u);
  pilots.up = CVec::Constant(1, cplx(1, 0));

  AoaPartition part;
  part.theta_c = RVec::Zero(1);
  part.xc_c = CVec::Constant(1, cplx(1, 0));

  const EfimBundle b = assemble_fim(part, pilots, 1.0, 1.0);
  REQUIRE(b.j_full.rows() == 1);
  CHECK(b.j_full(0, 0) == doctest::Approx(kPi * kPi).epsilon(1e-12));
}

TEST_CASE("endfire paths are uninformative") {
  AoaPartition part;
  part.theta_r = RVec::Constant(1, 0.5 * kPi);
  part.theta_s = RVec(0);
  part.theta_c = RVec::Constant(1, 0.4);
  part.xr_r = CVec::Constant(1, cplx(2, 1));
  part.xc_c = CVec::Constant(1, cplx(1, 0));

  const ChannelJacobians jac = channel_jacobians(part, 4);
  CHECK(jac.dhr.row(0).norm() < 1e-14);
  CHECK(jac.dhc.row(0).norm() > 0.1);
}

TEST_CASE("channel jacobians match finite differences") {
  const int m = 4;
  const AoaPartition part = three_path_partition();
  const ChannelJacobians jac = channel_jacobians(part, m);

  // Radar rows: k=0 is the pure-radar path, k=1 the common path.
  const auto radar_map = [&](cplx gain) {
    return [gain, m](double th) -> CVec {
      const CVec a = steering_vector(th, m);
      CMat ht = (gain * a * a.adjoint()).transpose();
      return Eigen::Map<CVec>(ht.data(), ht.size());
    };
  };
  CVec fd = finite_diff_cvec(radar_map(part.xr_r(0)), part.theta_r(0), 1e-6);
  CHECK((jac.dhr.row(0).transpose() - fd).cwiseAbs().maxCoeff() < 1e-6);
  fd = finite_diff_cvec(radar_map(part.xr_s(0)), part.theta_s(0), 1e-6);
  CHECK((jac.dhr.row(1).transpose() - fd).cwiseAbs().maxCoeff() < 1e-6);

  // Comm rows: l=0 is the common path, l=1 the pure-comm path.
  const auto comm_map = [&](cplx gain) {
    return [gain, m](double th) -> CVec {
      return gain * steering_vector(th, m);
    };
  };
  fd = finite_diff_cvec(comm_map(part.xc_s(0)), part.theta_s(0), 1e-6);
  CHECK((jac.dhc.row(0).transpose() - fd).cwiseAbs().maxCoeff() < 1e-6);
  fd = finite_diff_cvec(comm_map(part.xc_c(0)), part.theta_c(0), 1e-6);
  CHECK((jac.dhc.row(1).transpose() - fd).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("information is symmetric positive semidefinite") {
  const PilotSet pilots = simple_pilots(8, 2, 2, 52u);
  AoaPartition part;
  part.theta_r = (RVec(2) << -0.9, 0.15).finished();
  part.theta_s = (RVec(2) << -0.3, 0.6).finished();
  part.theta_c = RVec::Constant(1, 1.1);
  Rng rng = make_rng(53u);
  part.xr_r = cnormal_vec(rng, 2);
  part.xr_s = cnormal_vec(rng, 2);
  part.xc_s = cnormal_vec(rng, 2);
  part.xc_c = cnormal_vec(rng, 1);

  const EfimBundle b = assemble_fim(part, pilots, 0.5, 1.5);
  const double scale = b.j_full.cwiseAbs().maxCoeff();
  CHECK((b.j_full - b.j_full.transpose()).cwiseAbs().maxCoeff() <
        1e-12 * scale);
  Eigen::SelfAdjointEigenSolver<RMat> es(b.j_full);
  CHECK(es.eigenvalues().minCoeff() > -1e-9 * scale);

  // Conditioning on nuisance comm angles can only remove information.
  const RMat gap = b.radar_block() - b.j_eff;
  Eigen::SelfAdjointEigenSolver<RMat> eg(gap);
  CHECK(eg.eigenvalues().minCoeff() > -1e-9 * scale);
}

TEST_CASE("pure-radar and pure-comm angles share no information") {
  const PilotSet pilots = simple_pilots(4, 1, 1, 54u);
  AoaPartition part;
  part.theta_r = RVec::Constant(1, 0.25);
  part.theta_c = RVec::Constant(1, -0.7);
  part.xr_r = CVec::Constant(1, cplx(1.3, -0.2));
  part.xc_c = CVec::Constant(1, cplx(0.4, 0.9));

  const EfimBundle b = assemble_fim(part, pilots, 1.0, 1.0);
  CHECK(b.j_full(0, 1) == 0.0);
  CHECK(b.j_full(1, 0) == 0.0);
}

TEST_CASE("scaling all gains by two quadruples the information") {
  const PilotSet pilots = simple_pilots(6, 2, 1, 55u);
  AoaPartition part = three_path_partition();
  const EfimBundle b1 = assemble_fim(part, pilots, 0.8, 1.2);
  part.xr_r *= 2.0;
  part.xr_s *= 2.0;
  part.xc_s *= 2.0;
  part.xc_c *= 2.0;
  const EfimBundle b4 = assemble_fim(part, pilots, 0.8, 1.2);
  CHECK((b4.j_full - 4.0 * b1.j_full).cwiseAbs().maxCoeff() <
        1e-12 * b4.j_full.cwiseAbs().maxCoeff());
}

TEST_CASE("doubling downlink power doubles radar information") {
  AoaPartition part;
  part.theta_r = (RVec(2) << -0.4, 0.35).finished();
  part.xr_r = (CVec(2) << cplx(1, 0.5), cplx(-0.3, 1.1)).finished();

  PilotSet pilots = simple_pilots(6, 2, 1, 56u);
  const EfimBundle b1 = assemble_fim(part, pilots, 1.0, 1.0);
  pilots.dp1 *= std::sqrt(2.0);
  const EfimBundle b2 = assemble_fim(part, pilots, 1.0, 1.0);
  CHECK((b2.j_full - 2.0 * b1.j_full).cwiseAbs().maxCoeff() <
        1e-12 * b2.j_full.cwiseAbs().maxCoeff());
}

TEST_CASE("without pure-comm angles the effective information is the block") {
  const PilotSet pilots = simple_pilots(6, 1, 1, 57u);
  AoaPartition part;
  part.theta_r = RVec::Constant(1, 0.2);
  part.theta_s = RVec::Constant(1, -0.6);
  part.xr_r = CVec::Constant(1, cplx(1, 0));
  part.xr_s = CVec::Constant(1, cplx(0, 1));
  part.xc_s = CVec::Constant(1, cplx(1, 1));

  const EfimBundle b = assemble_fim(part, pilots, 1.0, 1.0);
  CHECK((b.j_eff - b.radar_block()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the bound matrix inverts the effective information") {
  const PilotSet pilots = simple_pilots(8, 2, 1, 58u);
  AoaPartition part;
  part.theta_r = (RVec(3) << -0.8, 0.1, 0.7).finished();
  part.xr_r = (CVec(3) << cplx(1, 0), cplx(0.5, -0.5), cplx(-0.2, 0.9))
                  .finished();

  const EfimBundle b = assemble_fim(part, pilots, 1.0, 1.0);
  const RMat c = crb(b);
  CHECK((c * b.j_eff - RMat::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <
        1e-10 * c.cwiseAbs().maxCoeff());

  // Scalar case: the bound is the reciprocal of the information.
  AoaPartition single;
  single.theta_r = RVec::Constant(1, 0.3);
  single.xr_r = CVec::Constant(1, cplx(1, 0));
  const EfimBundle bs = assemble_fim(single, pilots, 1.0, 1.0);
  CHECK(crb(bs)(0, 0) ==
        doctest::Approx(1.0 / bs.j_eff(0, 0)).epsilon(1e-12));
}

TEST_CASE("degenerate configurations are rejected") {
  const PilotSet pilots = simple_pilots(4, 1, 1, 59u);

  // A zero-gain pure-comm path makes its nuisance block singular.
  AoaPartition part;
  part.theta_r = RVec::Constant(1, 0.2);
  part.theta_c = RVec::Constant(1, 0.5);
  part.xr_r = CVec::Constant(1, cplx(1, 0));
  part.xc_c = CVec::Zero(1);
  CHECK_THROWS_AS(assemble_fim(part, pilots, 1.0, 1.0), NumericalError);

  // An endfire radar path has zero information: the bound does not exist.
  AoaPartition endfire;
  endfire.theta_r = RVec::Constant(1, 0.5 * kPi);
  endfire.xr_r = CVec::Constant(1, cplx(1, 0));
  const EfimBundle be = assemble_fim(endfire, pilots, 1.0, 1.0);
  CHECK_THROWS_AS(crb(be), NumericalError);

  // Duplicate angles across partition sets are a configuration error.
  AoaPartition dup;
  dup.theta_r = RVec::Constant(1, 0.2);
  dup.theta_c = RVec::Constant(1, 0.2);
  dup.xr_r = CVec::Constant(1, cplx(1, 0));
  dup.xc_c = CVec::Constant(1, cplx(1, 0));
  CHECK_THROWS_AS(assemble_fim(dup, pilots, 1.0, 1.0), ConfigError);
}

TEST_CASE("detected indices are partitioned by modality") {
  const RVec theta = (RVec(5) << -0.8, -0.3, 0.1, 0.5, 0.9).finished();
  const RVec p_r = (RVec(5) << 0.9, 0.9, 0.1, 0.45, 0.7).finished();
  const RVec p_c = (RVec(5) << 0.8, 0.2, 0.9, 0.44, 0.6).finished();
  CVec x_r = CVec::Constant(5, cplx(1, 1));
  CVec x_c = CVec::Constant(5, cplx(2, -1));
  x_c(4) = 0.0;  // detected but zero posterior gain: carries no information

  const AoaPartition part =
      AoaPartition::from_detections(theta, p_r, p_c, x_r, x_c, 0.5);
  REQUIRE(part.n_s() == 1);
  REQUIRE(part.n_r() == 2);  // index 1 plus index 4 (comm side suppressed)
  REQUIRE(part.n_c() == 1);
  CHECK(part.theta_s(0) == -0.8);
  CHECK(part.theta_r(0) == -0.3);
  CHECK(part.theta_r(1) == 0.9);
  CHECK(part.theta_c(0) == 0.1);
  CHECK(part.xr_s(0) == cplx(1, 1));
  CHECK(part.xc_s(0) == cplx(2, -1));
}

TEST_CASE("a scene partitions into its true supports") {
  const SceneTruth scene = make_cdl_like_scene(0.5, 3, 3, 16, 61u);
  const AoaPartition part = AoaPartition::from_scene(scene);
  int nr = 0, ns = 0, nc = 0;
  for (int i = 0; i < scene.m; ++i) {
    if (scene.s_r(i) && scene.s_c(i))
      ++ns;
    else if (scene.s_r(i))
      ++nr;
    else if (scene.s_c(i))
      ++nc;
  }
  CHECK(part.n_r() == nr);
  CHECK(part.n_s() == ns);
  CHECK(part.n_c() == nc);
}

TEST_CASE("covariance-form information matches the vector form") {
  const int m = 6;
  const AoaPartition part = three_path_partition();
  PilotSet stage1 = simple_pilots(m, 2, 1, 62u);

  // No second-stage energy at all.
  const EfimBundle direct = assemble_fim(part, stage1, 0.7, 1.1);
  const EfimBundle lifted =
      efim_from_covariances(part, stage1, {}, 0.7, 1.1);
  CHECK((lifted.j_full - direct.j_full).cwiseAbs().maxCoeff() <
        1e-10 * direct.j_full.cwiseAbs().maxCoeff());

  // Rank-one covariances reproduce explicit second-stage vectors.
  Rng rng = make_rng(63u);
  PilotSet both = stage1;
  both.dp2 = make_omni_dps(m, 2, 1.0, rng);
  std::vector<CMat> covs;
  for (int p = 0; p < both.dp2.cols(); ++p)
    covs.push_back(both.dp2.col(p) * both.dp2.col(p).adjoint());
  const EfimBundle direct2 = assemble_fim(part, both, 0.7, 1.1);
  const EfimBundle lifted2 =
      efim_from_covariances(part, stage1, covs, 0.7, 1.1);
  CHECK((lifted2.j_full - direct2.j_full).cwiseAbs().maxCoeff() <
        1e-10 * direct2.j_full.cwiseAbs().maxCoeff());
}

TEST_CASE("information is additive in the downlink covariance") {
  const int m = 6;
  const AoaPartition part = three_path_partition();
  const PilotSet stage1 = simple_pilots(m, 1, 1, 64u);
  Rng rng = make_rng(65u);
  const CMat w1 = random_psd(m, rng);
  const CMat w2 = random_psd(m, rng);

  const EfimBundle split =
      efim_from_covariances(part, stage1, {w1, w2}, 1.0, 1.0);
  const EfimBundle merged =
      efim_from_covariances(part, stage1, {w1 + w2}, 1.0, 1.0);
  CHECK((split.j_full - merged.j_full).cwiseAbs().maxCoeff() <
        1e-12 * merged.j_full.cwiseAbs().maxCoeff());

  // Rows touching only the uplink never depend on downlink energy: the
  // pure-comm diagonal and the common/pure-comm cross term.
  const EfimBundle none = efim_from_covariances(part, stage1, {}, 1.0, 1.0);
  const int nr = part.n_r();
  CHECK(split.j_full(nr + 1, nr + 1) == none.j_full(nr + 1, nr + 1));
  CHECK(split.j_full(nr, nr + 1) == none.j_full(nr, nr + 1));
  // The common angle is also radar-visible, so extra energy informs it.
  CHECK(split.j_full(nr, nr) > none.j_full(nr, nr));
}

TEST_CASE("sampled score covariance reproduces the information matrix") {
  const int m = 4;
  const PilotSet pilots = simple_pilots(m, 1, 1, 66u);
  const AoaPartition part = three_path_partition();
  const double nvr = 0.4, nvc = 0.7;

  const EfimBundle b = assemble_fim(part, pilots, nvr, nvc);
  const RMat sampled = score_covariance(part, pilots, nvr, nvc, 100000, 67u);
  const double rel =
      (sampled - b.j_full).norm() / b.j_full.norm();
  CHECK(rel < 0.02);
}

}  // TEST_SUITE

#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "isac/pilot_opt.hpp"
#include "isac/sdp.hpp"

using namespace isac;

namespace {

CMat random_hermitian(int n, Rng& rng) {
  const CMat g = cnormal_mat(rng, n, n);
  return 0.5 * (g + g.adjoint());
}

// The deterministic three-path design problem used for the reference-solver
// comparison; the expected objectives below were produced by an independent
// interior-point solver on a dump of these exact instances.
struct CrossCheck {
  AoaPartition part;
  PilotSet stage1;
  PilotOptConfig cfg;
};

CrossCheck cross_check_setup() {
  CrossCheck cc;
  cc.part.theta_r = RVec::Constant(1, 0.4);
  cc.part.theta_s = RVec::Constant(1, -0.2);
  cc.part.theta_c = RVec::Constant(1, 0.9);
  cc.part.xr_r = CVec::Constant(1, cplx(1.2, 0.3));
  cc.part.xr_s = CVec::Constant(1, cplx(0.8, -0.5));
  cc.part.xc_s = CVec::Constant(1, cplx(0.6, 0.7));
  cc.part.xc_c = CVec::Constant(1, cplx(1.0, 0.0));

  Rng rng_d = make_rng(77u);
  Rng rng_u = make_rng(78u);
  cc.stage1.dp1 = make_omni_dps(6, 1, 1.0, rng_d);
  cc.stage1.dp2 = CMat(6, 0);
  cc.stage1.up = make_unit_modulus_ups(1, rng_u);
  cc.stage1.power_budget = 1.0;

  cc.cfg.p2 = 1;
  cc.cfg.power = 1.0;
  cc.cfg.epsilon = 1e-3;
  return cc;
}

}  // namespace

TEST_SUITE("sdp") {

TEST_CASE("hermitian coordinates round-trip") {
  Rng rng = make_rng(71u);
  const int n = 4;
  const CMat v = random_hermitian(n, rng);
  const RVec x = herm_coords(v);
  REQUIRE(x.size() == herm_coord_count(n));
  const CMat back = herm_from_coords(x, n);
  CHECK((back - v).cwiseAbs().maxCoeff() < 1e-14);

  // Arbitrary coordinates produce a Hermitian matrix.
  RVec raw(n * n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < raw.size(); ++i) raw(i) = u(rng);
  const CMat h = herm_from_coords(raw, n);
  CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((herm_coords(h) - raw).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gradient reads pair against coordinates as a trace") {
  Rng rng = make_rng(72u);
  const int n = 5;
  const CMat s = random_hermitian(n, rng);
  RVec x(n * n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < x.size(); ++i) x(i) = u(rng);

  const double lhs = herm_read(s).dot(x);
  const double rhs = (s * herm_from_coords(x, n)).trace().real();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("pair indexing walks the packed upper triangle") {
  const int k = 4;
  int expected = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i; j < k; ++j) CHECK(upper_pair_index(i, j, k) == expected++);
  CHECK(expected == k * (k + 1) / 2);
}

TEST_CASE("a scalar problem saturates its power budget") {
  ConvexSubproblem sub;
  sub.n_t = 1;
  sub.p2 = 1;
  sub.k = 1;
  sub.c_eff = RMat::Constant(1, 1, 0.7);
  sub.gain = {CMat::Constant(1, 1, cplx(2.5, 0.0))};
  sub.trace_bound = 1.3;

  const SubproblemSolution sol = solve_subproblem(sub, 1e-6);
  CHECK(sol.lambda == doctest::Approx(0.7 + 2.5 * 1.3).epsilon(1e-6));
  CHECK(std::abs(sol.v_mats[0](0, 0) - cplx(1.3, 0)) < 1e-5);
  CHECK(sol.gap >= 0.0);
  CHECK(sol.newton_steps > 0);

  // Beyond the arithmetic floor the solver degrades gracefully: it returns
  // the last certified center and an honest gap instead of failing.
  const SubproblemSolution tight = solve_subproblem(sub, 1e-12);
  CHECK(tight.lambda == doctest::Approx(0.7 + 2.5 * 1.3).epsilon(1e-6));
  CHECK(tight.gap >= 0.0);
  CHECK(tight.gap <= 1e-5);
}

TEST_CASE("solutions are feasible and certify their objective") {
  const CrossCheck cc = cross_check_setup();
  const ConvexSubproblem sub =
      build_subproblem(cc.part, cc.stage1, cc.cfg, nullptr, 1e-3);
  const SubproblemSolution sol = solve_subproblem(sub, 1e-6);

  for (const CMat& v : sol.v_mats) {
    Eigen::SelfAdjointEigenSolver<CMat> es(v);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
    CHECK(v.trace().real() <= sub.trace_bound * (1.0 + 1e-9));
  }
  const RMat lmi = sub.efim(sol.v_mats);
  Eigen::SelfAdjointEigenSolver<RMat> es(lmi);
  CHECK(es.eigenvalues().minCoeff() >= sol.lambda - 1e-9);
}

TEST_CASE("the relaxed design matches the reference solver") {
  const CrossCheck cc = cross_check_setup();
  const ConvexSubproblem sub =
      build_subproblem(cc.part, cc.stage1, cc.cfg, nullptr, 1e-3);
  const SubproblemSolution sol = solve_subproblem(sub, 1e-6);

  const double reference = 116.5470916703;
  CHECK(std::abs(sol.lambda - reference) <=
        1e-4 * std::max(1.0, std::abs(reference)));
}

TEST_CASE("the rank-constrained design matches the reference solver") {
  const CrossCheck cc = cross_check_setup();
  const CVec b = steering_vector(0.1, 6);
  std::vector<CMat> lin = {0.9 * b * b.adjoint() +
                           1e-6 * CMat::Identity(6, 6)};
  const ConvexSubproblem sub =
      build_subproblem(cc.part, cc.stage1, cc.cfg, &lin, 1e-3);
  REQUIRE(!sub.rank_d.empty());
  const SubproblemSolution sol = solve_subproblem(sub, 1e-6, &lin);

  const double reference = 78.6249676036;
  CHECK(std::abs(sol.lambda - reference) <=
        1e-4 * std::max(1.0, std::abs(reference)));

  // The identity cold start violates this instance's rank row.
  CHECK_THROWS_AS(solve_subproblem(sub, 1e-6), ConfigError);
}

TEST_CASE("malformed problems are rejected") {
  ConvexSubproblem sub;
  sub.n_t = 1;
  sub.p2 = 1;
  sub.k = 1;
  sub.c_eff = RMat::Constant(1, 1, 1.0);
  sub.trace_bound = 1.0;

  // Wrong number of gain matrices for the LMI dimension.
  sub.gain = {CMat::Identity(1, 1), CMat::Identity(1, 1)};
  CHECK_THROWS_AS(solve_subproblem(sub, 1e-6), ConfigError);

  // Non-Hermitian gain matrix.
  sub.gain = {(CMat(1, 1) << cplx(0.0, 1.0)).finished()};
  CHECK_THROWS_AS(solve_subproblem(sub, 1e-6), ConfigError);

  // Non-positive trace bound.
  sub.gain = {CMat::Identity(1, 1)};
  sub.trace_bound = 0.0;
  CHECK_THROWS_AS(solve_subproblem(sub, 1e-6), ConfigError);

  // Non-positive tolerance.
  sub.trace_bound = 1.0;
  CHECK_THROWS_AS(solve_subproblem(sub, 0.0), ConfigError);
}

}  // TEST_SUITE

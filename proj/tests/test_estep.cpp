#include "doctest.h"

#include "isac/estep.hpp"
#include "isac/oracle.hpp"

using namespace isac;

namespace {

// Hand-built operator with explicit per-block maps (bypasses pilot algebra).
MeasurementOperator manual_op(const CMat& f_r, const CMat& f_c) {
  MeasurementOperator op;
  op.m = static_cast<int>(f_c.cols());
  op.p = f_r.rows() > 0 ? static_cast<int>(f_r.rows()) / op.m : 0;
  op.q = static_cast<int>(f_c.rows()) / op.m;
  op.f_r = f_r;
  op.f_c = f_c;
  op.v_mat = CMat::Zero(f_r.rows(), op.m * op.m);
  op.u_mat = CMat::Zero(f_c.rows(), op.m);
  return op;
}

GaussianBelief flat_belief(int n, double var) {
  GaussianBelief b;
  b.mean = CVec::Zero(n);
  b.var = RVec::Constant(n, var);
  return b;
}

HmmParams random_params(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HmmParams p;
  p.rho01 = 0.1 + 0.2 * u(rng);
  p.rho10 = 0.2 + 0.3 * u(rng);
  p.rho_r = 0.5 + 0.4 * u(rng);
  p.rho_c_cond = 0.5 + 0.4 * u(rng);
  return p;
}

}  // namespace

TEST_SUITE("estep") {

TEST_CASE("scalar posterior follows the information-form update") {
  CMat f(1, 1);
  f << cplx(1, 0);
  const MeasurementOperator op = manual_op(f, f);
  Observation obs;
  obs.y_r = CVec::Constant(1, cplx(2, 0));
  obs.y_c = CVec::Constant(1, cplx(2, 0));
  obs.noise_var_r = obs.noise_var_c = 1.0;

  const GaussianBelief post =
      lmmse_update(op, obs, flat_belief(2, 1.0), LmmseVariant::Exact);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(post.mean(i) - cplx(1, 0)) < 1e-14);
    CHECK(post.var(i) == doctest::Approx(0.5).epsilon(1e-14));
  }
}

TEST_CASE("unitary operator halves a unit prior variance") {
  const int m = 2;
  const AngularGrid grid = AngularGrid::uniform(m);
  CMat a(m, m);
  for (int i = 0; i < m; ++i) a.col(i) = steering_vector(grid.theta(i), m);
  const MeasurementOperator op = manual_op(CMat(0, m), a);

  Observation obs;
  obs.y_r = CVec(0);
  obs.y_c = (CVec(2) << cplx(1, 1), cplx(-2, 0)).finished();
  obs.noise_var_r = obs.noise_var_c = 1.0;

  const GaussianBelief post =
      lmmse_update(op, obs, flat_belief(2 * m, 1.0), LmmseVariant::Exact);
  const CVec want = a.adjoint() * obs.y_c / 2.0;
  for (int i = 0; i < m; ++i) {
    CHECK(post.var(m + i) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(post.mean(m + i) - want(i)) < 1e-12);
    // No radar rows: that block keeps its prior.
    CHECK(post.var(i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(post.mean(i)) < 1e-14);
  }
}

TEST_CASE("banded expansion tracks the exact posterior on a random operator") {
  const int m = 16;
  Rng rng = make_rng(31u);
  PilotSet pilots;
  pilots.dp1 = make_omni_dps(m, 2, 1.0, rng);
  pilots.dp2 = CMat(m, 0);
  pilots.up = make_unit_modulus_ups(2, rng);
  pilots.power_budget = 1.0;
  const AngularGrid grid = AngularGrid::uniform(m);
  const MeasurementOperator op = build_operator(pilots, grid, Stage::One);

  Observation obs;
  obs.y_r = cnormal_vec(rng, 2 * m);
  obs.y_c = cnormal_vec(rng, 2 * m);
  obs.noise_var_r = obs.noise_var_c = 0.5;

  const GaussianBelief prior = flat_belief(2 * m, 1.0);
  const GaussianBelief exact =
      lmmse_update(op, obs, prior, LmmseVariant::Exact);
  const GaussianBelief banded =
      lmmse_update(op, obs, prior, LmmseVariant::Banded);
  CHECK((banded.mean - exact.mean).norm() / exact.mean.norm() < 0.05);
  CHECK((banded.var.array() > 0.0).all());

  // The uncorrected printed expansion is a distinct (worse) approximation.
  const GaussianBelief printed =
      lmmse_update(op, obs, prior, LmmseVariant::Banded, true);
  CHECK((printed.mean - banded.mean).norm() > 0.0);
}

TEST_CASE("scalar-variance mode is exact on a proportional-Gram operator") {
  const int m = 2;
  const AngularGrid grid = AngularGrid::uniform(m);
  Rng rng = make_rng(32u);
  PilotSet pilots;
  pilots.dp1 = make_omni_dps(m, m, 1.0, rng);  // full basis: sum v v^H = I
  pilots.dp2 = CMat(m, 0);
  pilots.up = make_unit_modulus_ups(1, rng);
  pilots.power_budget = 1.0;
  const MeasurementOperator op = build_operator(pilots, grid, Stage::One);

  Observation obs;
  obs.y_r = cnormal_vec(rng, m * m);
  obs.y_c = cnormal_vec(rng, m);
  obs.noise_var_r = obs.noise_var_c = 1.0;

  const GaussianBelief prior = flat_belief(2 * m, 0.7);
  const GaussianBelief exact =
      lmmse_update(op, obs, prior, LmmseVariant::Exact);
  const GaussianBelief po =
      lmmse_update(op, obs, prior, LmmseVariant::PoApprox);
  CHECK((po.mean - exact.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((po.var - exact.var).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("extrinsic subtraction recovers the raw measurement") {
  GaussianBelief post, pri;
  post.mean = CVec::Constant(1, cplx(1, 0));
  post.var = RVec::Constant(1, 0.5);
  pri.mean = CVec::Zero(1);
  pri.var = RVec::Constant(1, 1.0);

  const GaussianBelief ext = extrinsic(post, pri);
  CHECK(std::abs(ext.mean(0) - cplx(2, 0)) < 1e-14);
  CHECK(ext.var(0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("uninformative posterior clamps to the variance ceiling") {
  GaussianBelief b;
  b.mean = CVec::Constant(1, cplx(0.3, -0.2));
  b.var = RVec::Constant(1, 0.8);
  const GaussianBelief ext = extrinsic(b, b, 123.0);
  CHECK(ext.var(0) == doctest::Approx(123.0).epsilon(1e-14));
}

TEST_CASE("extrinsic and prior recombine into the posterior") {
  Rng rng = make_rng(33u);
  GaussianBelief post, pri;
  const int n = 6;
  pri.mean = cnormal_vec(rng, n);
  pri.var = RVec::Constant(n, 2.0);
  post.mean = cnormal_vec(rng, n);
  post.var = RVec::Constant(n, 0.5);  // strictly sharper: no clamps fire

  const GaussianBelief ext = extrinsic(post, pri);
  for (int i = 0; i < n; ++i) {
    const double prec = 1.0 / pri.var(i) + 1.0 / ext.var(i);
    CHECK(prec == doctest::Approx(1.0 / post.var(i)).epsilon(1e-12));
    const cplx mean_info =
        pri.mean(i) / pri.var(i) + ext.mean(i) / ext.var(i);
    CHECK(std::abs(mean_info / prec - post.mean(i)) < 1e-12);
  }
}

TEST_CASE("chain-coupled pass matches exhaustive enumeration") {
  const int m = 4;
  Rng rng = make_rng(34u);
  std::uniform_real_distribution<double> uv(0.5, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const HmmParams params = random_params(rng);
    GaussianBelief ext;
    ext.mean = cnormal_vec(rng, 2 * m, 2.0);
    ext.var.resize(2 * m);
    for (int i = 0; i < 2 * m; ++i) ext.var(i) = uv(rng);

    GaussianBelief post;
    SupportPosterior sup;
    module_b_pass(ext, params, &post, &sup);

    const EnumeratedPosterior exact = enumerate_posterior(
        CMat::Identity(2 * m, 2 * m), ext.mean, ext.var, params);
    worst = std::max(worst, (sup.pi_r - exact.p_r).cwiseAbs().maxCoeff());
    worst = std::max(worst, (sup.pi_c - exact.p_c).cwiseAbs().maxCoeff());
    worst = std::max(worst, (post.mean - exact.x_mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (post.var - exact.x_var).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("strong one-index evidence saturates both modalities") {
  const int m = 4;
  HmmParams params;
  params.rho_r = 1.0;
  params.rho_c_cond = 1.0;
  GaussianBelief ext;
  ext.mean = CVec::Zero(2 * m);
  ext.var = RVec::Constant(2 * m, 1e4);
  ext.mean(1) = cplx(30, 0);  // radar coefficient, index 1
  ext.var(1) = 1e-4;
  ext.mean(m + 1) = cplx(30, 0);
  ext.var(m + 1) = 1e-4;

  GaussianBelief post;
  SupportPosterior sup;
  module_b_pass(ext, params, &post, &sup);
  CHECK(sup.pi_r(1) > 0.999);
  CHECK(sup.pi_c(1) > 0.999);
}

TEST_CASE("uninformative evidence reproduces the stationary activity") {
  const int m = 8;
  HmmParams params;
  params.rho01 = 0.15;
  params.rho10 = 0.45;
  params.rho_r = 1.0;
  params.rho_c_cond = 1.0;
  GaussianBelief ext;
  ext.mean = CVec::Zero(2 * m);
  ext.var = RVec::Constant(2 * m, 1e12);

  GaussianBelief post;
  SupportPosterior sup;
  module_b_pass(ext, params, &post, &sup);
  const double lam = params.lambda();
  for (int i = 0; i < m; ++i) {
    CHECK(sup.pi_r(i) == doctest::Approx(lam).epsilon(1e-6));
    CHECK(sup.pi_c(i) == doctest::Approx(lam).epsilon(1e-6));
  }
}

TEST_CASE("full inner loop agrees with enumeration at moderate noise") {
  const int m = 4;
  Rng rng = make_rng(35u);
  EstepConfig cfg;
  double err_sum = 0.0;
  int err_count = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const HmmParams params = random_params(rng);
    PilotSet pilots;
    pilots.dp1 = make_omni_dps(m, 1, 1.0, rng);
    pilots.dp2 = CMat(m, 0);
    pilots.up = make_unit_modulus_ups(1, rng);
    pilots.power_budget = 1.0;
    const AngularGrid grid = AngularGrid::uniform(m);
    const MeasurementOperator op = build_operator(pilots, grid, Stage::One);

    const SupportTriple sup = sample_supports(params, m, rng);
    const SceneTruth scene = sample_scene(params, sup, grid, 0.0, rng);
    const Observation obs = observe(scene, pilots, Stage::One, 0.1, 0.1, rng);

    const EstepResult est = run_estep(op, obs, params, cfg);
    const EnumeratedPosterior exact = enumerate_posterior(op, obs, params);
    err_sum += (est.support.pi_r - exact.p_r).cwiseAbs().sum();
    err_sum += (est.support.pi_c - exact.p_c).cwiseAbs().sum();
    err_count += 2 * m;

    for (int i = 0; i < m; ++i) {
      CHECK(est.support.pi_r(i) >= 0.0);
      CHECK(est.support.pi_r(i) <= 1.0);
      CHECK(est.support.pi_c(i) >= 0.0);
      CHECK(est.support.pi_c(i) <= 1.0);
    }
    CHECK((est.belief.var.array() > 0.0).all());
    CHECK(est.iterations_used <= cfg.i_in);
  }
  CHECK(err_sum / err_count < 0.05);
}

TEST_CASE("a clean strong target is recovered almost exactly") {
  const int m = 8;
  HmmParams params;
  Rng rng = make_rng(36u);
  PilotSet pilots;
  pilots.dp1 = make_omni_dps(m, 2, 1.0, rng);
  pilots.dp2 = CMat(m, 0);
  pilots.up = make_unit_modulus_ups(2, rng);
  pilots.power_budget = 1.0;
  const AngularGrid grid = AngularGrid::uniform(m);
  const MeasurementOperator op = build_operator(pilots, grid, Stage::One);

  SceneTruth scene;
  scene.m = m;
  scene.theta = grid.theta;
  scene.s = IVec::Zero(m);
  scene.s_r = IVec::Zero(m);
  scene.s_c = IVec::Zero(m);
  scene.x_r = CVec::Zero(m);
  scene.x_c = CVec::Zero(m);
  scene.s(3) = scene.s_r(3) = scene.s_c(3) = 1;
  scene.x_r(3) = cplx(1.0, 0.5);
  scene.x_c(3) = cplx(-0.8, 0.6);

  const Observation obs =
      observe(scene, pilots, Stage::One, 1e-8, 1e-8, rng);
  const EstepResult est = run_estep(op, obs, params, EstepConfig{});

  CHECK(est.support.pi_r(3) > 0.999);
  CHECK(est.support.pi_c(3) > 0.999);
  for (int i = 0; i < m; ++i) {
    if (i == 3) continue;
    CHECK(est.support.pi_r(i) < 0.01);
    CHECK(est.support.pi_c(i) < 0.01);
  }
  CHECK(std::abs(est.belief.mean(3) - scene.x_r(3)) < 1e-3);
  CHECK(std::abs(est.belief.mean(m + 3) - scene.x_c(3)) < 1e-3);
}

TEST_CASE("pure noise with a sparse prior stays below the decision threshold") {
  const int m = 16;
  HmmParams params;
  params.rho01 = 0.01;
  params.rho10 = 0.19;  // stationary activity 0.05
  Rng rng = make_rng(37u);
  PilotSet pilots;
  pilots.dp1 = make_omni_dps(m, 2, 1.0, rng);
  pilots.dp2 = CMat(m, 0);
  pilots.up = make_unit_modulus_ups(1, rng);
  pilots.power_budget = 1.0;
  const AngularGrid grid = AngularGrid::uniform(m);
  const MeasurementOperator op = build_operator(pilots, grid, Stage::One);

  SceneTruth scene;
  scene.m = m;
  scene.theta = grid.theta;
  scene.s = IVec::Zero(m);
  scene.s_r = IVec::Zero(m);
  scene.s_c = IVec::Zero(m);
  scene.x_r = CVec::Zero(m);
  scene.x_c = CVec::Zero(m);

  const Observation obs = observe(scene, pilots, Stage::One, 1.0, 1.0, rng);
  const EstepResult est = run_estep(op, obs, params, EstepConfig{});
  CHECK(est.support.pi_r.maxCoeff() < 0.5);
  CHECK(est.support.pi_c.maxCoeff() < 0.5);
}

}  // TEST_SUITE

#include "doctest.h"

#include "isac/array.hpp"
#include "isac/oracle.hpp"

using namespace isac;

namespace {

double max_abs_diff(const CVec& a, const CVec& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("array") {

TEST_CASE("steering vector closed forms at m = 2") {
  const double r = 1.0 / std::sqrt(2.0);

  CVec a0 = steering_vector(0.0, 2);
  CHECK(max_abs_diff(a0, (CVec(2) << cplx(r, 0), cplx(r, 0)).finished()) <
        1e-15);

  CVec a90 = steering_vector(kPi / 2, 2);
  CHECK(max_abs_diff(a90, (CVec(2) << cplx(r, 0), cplx(-r, 0)).finished()) <
        1e-15);

  CVec a30 = steering_vector(kPi / 6, 2);
  CHECK(max_abs_diff(a30, (CVec(2) << cplx(r, 0), cplx(0, -r)).finished()) <
        1e-15);
}

TEST_CASE("steering vectors have unit norm") {
  for (int m : {1, 2, 5, 16, 64})
    for (double th : {-1.5, -0.7, 0.0, 0.3, 1.2})
      CHECK(steering_vector(th, m).norm() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("steering derivative closed forms") {
  const double r = 1.0 / std::sqrt(2.0);
  CVec d0 = steering_vector(0.0, 2);  // reuse for size only
  d0 = steering_derivative(0.0, 2);
  CHECK(std::abs(d0(0)) < 1e-15);
  CHECK(std::abs(d0(1) - cplx(0, -kPi * r)) < 1e-14);

  CHECK(steering_derivative(kPi / 2, 5).norm() < 1e-14);
}

TEST_CASE("steering derivative matches finite differences") {
  for (double th : {0.3, -0.9, 1.1}) {
    const int m = 4;
    CVec fd = finite_diff_cvec(
        [m](double t) { return steering_vector(t, m); }, th, 1e-6);
    CHECK(max_abs_diff(fd, steering_derivative(th, m)) < 1e-6);
  }
}

TEST_CASE("radar column closed forms at m = 2") {
  CVec c0 = radar_column(0.0, 2);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(c0(i) - cplx(0.5, 0)) < 1e-15);

  CVec c90 = radar_column(kPi / 2, 2);
  CHECK(std::abs(c90(0) - cplx(0.5, 0)) < 1e-14);
  CHECK(std::abs(c90(1) - cplx(-0.5, 0)) < 1e-14);
  CHECK(std::abs(c90(2) - cplx(-0.5, 0)) < 1e-14);
  CHECK(std::abs(c90(3) - cplx(0.5, 0)) < 1e-14);
}

TEST_CASE("radar column equals vectorized outer product") {
  const int m = 3;
  for (double th : {0.17, -0.6, 1.3}) {
    const CVec a = steering_vector(th, m);
    const CMat outer = a * a.adjoint();
    const CVec col = radar_column(th, m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        CHECK(std::abs(col(j * m + i) - outer(i, j)) < 1e-15);
  }
}

TEST_CASE("radar column reshapes to a Hermitian PSD matrix of unit trace") {
  const int m = 4;
  const CVec col = radar_column(0.42, m);
  CMat h = Eigen::Map<const CMat>(col.data(), m, m);
  CHECK((h - h.adjoint()).norm() < 1e-15);
  CHECK(std::abs(h.trace().real() - 1.0) < 1e-14);
  Eigen::SelfAdjointEigenSolver<CMat> es(h);
  CHECK(es.eigenvalues().minCoeff() > -1e-14);
}

TEST_CASE("radar column derivative closed forms and finite differences") {
  CHECK(radar_column_derivative(kPi / 2, 3).norm() < 1e-14);

  // vec(a' a^H + a a'^H) with a = [1,1]/sqrt(2), a' = [0, -j pi /sqrt(2)].
  const double r = 1.0 / std::sqrt(2.0);
  CVec a(2), ad(2);
  a << cplx(r, 0), cplx(r, 0);
  ad << cplx(0, 0), cplx(0, -kPi * r);
  const CMat dm = ad * a.adjoint() + a * ad.adjoint();
  const CVec got = radar_column_derivative(0.0, 2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(got(j * 2 + i) - dm(i, j)) < 1e-14);

  const int m = 4;
  CVec fd = finite_diff_cvec(
      [m](double t) { return radar_column(t, m); }, 0.7, 1e-6);
  CHECK(max_abs_diff(fd, radar_column_derivative(0.7, m)) < 1e-6);
}

TEST_CASE("uniform grid is sin-space uniform and stays inside the open range") {
  for (int m : {2, 8, 32}) {
    const AngularGrid g = AngularGrid::uniform(m);
    REQUIRE(g.size() == m);
    const double step = AngularGrid::sin_bin_width(m);
    for (int i = 0; i < m; ++i) {
      CHECK(g.theta(i) > -kPi / 2);
      CHECK(g.theta(i) < kPi / 2);
      if (i > 0)
        CHECK(std::sin(g.theta(i)) - std::sin(g.theta(i - 1)) ==
              doctest::Approx(step).epsilon(1e-12));
    }
    if (m >= 2) CHECK(g.min_spacing() > 0.0);
  }
}

}  // TEST_SUITE

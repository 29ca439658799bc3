#include "isac/array.hpp"

namespace isac {

CVec steering_vector(double theta, int m) {
  require(m >= 1, "steering_vector: m must be >= 1");
  CVec a(m);
  const double s = std::sin(theta);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (int k = 0; k < m; ++k) {
    const double phase = -kPi * k * s;
    a(k) = scale * cplx(std::cos(phase), std::sin(phase));
  }
  return a;
}

CVec steering_derivative(double theta, int m) {
  CVec a = steering_vector(theta, m);
  const double c = std::cos(theta);
  for (int k = 0; k < m; ++k) a(k) *= cplx(0.0, -kPi * k * c);
  return a;
}

CVec radar_column(double theta, int m) {
  const CVec a = steering_vector(theta, m);
  CMat outer = a * a.adjoint();
  return CVec(Eigen::Map<CVec>(outer.data(), outer.size()));
}

CVec radar_column_derivative(double theta, int m) {
  const CVec a = steering_vector(theta, m);
  const CVec da = steering_derivative(theta, m);
  CMat outer = da * a.adjoint() + a * da.adjoint();
  return CVec(Eigen::Map<CVec>(outer.data(), outer.size()));
}

AngularGrid AngularGrid::uniform(int m) {
  require(m >= 1, "AngularGrid: m must be >= 1");
  AngularGrid g;
  g.theta.resize(m);
  for (int k = 0; k < m; ++k)
    g.theta(k) = std::asin((2.0 * k + 1.0 - m) / m);
  return g;
}

double AngularGrid::min_spacing() const {
  require(theta.size() >= 2, "AngularGrid: min_spacing needs >= 2 entries");
  double d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k + 1 < theta.size(); ++k)
    d = std::min(d, theta(k + 1) - theta(k));
  return d;
}

}  // namespace isac

#pragma once
// Shared aliases and small helpers used across the library.

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace isac {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using IVec = Eigen::VectorXi;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Configuration errors (bad parameters, malformed files) vs. runtime/numerical
// failures are kept distinct so the CLI can map them to different exit codes.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace isac

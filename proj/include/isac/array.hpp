#pragma once
// Half-wavelength ULA response vectors, their angle derivatives, and the
// lifted "radar column" used for the monostatic reflection channel.

#include "isac/common.hpp"

namespace isac {

// a(theta) = (1/sqrt(m)) [1, e^{-j pi sin}, ..., e^{-j (m-1) pi sin}]^T
CVec steering_vector(double theta, int m);

// d a(theta) / d theta, elementwise (-j pi k cos theta) a_k(theta).
CVec steering_derivative(double theta, int m);

// Column of the lifted radar operator: conj(a) ⊗ a = vec(a a^H)
// (column-major vec; index (j*m + i) holds a_i * conj(a_j)).
CVec radar_column(double theta, int m);

// d/dtheta of radar_column: vec(a' a^H + a a'^H).
CVec radar_column_derivative(double theta, int m);

// Dynamic AoA grid. Entries live in (-pi/2, pi/2) and stay sorted as long as
// per-iteration moves are capped below half the minimal bin width.
struct AngularGrid {
  RVec theta;

  int size() const { return static_cast<int>(theta.size()); }

  // Bin midpoints uniform in sin-space: sin(theta_k) = (2k + 1 - m)/m.
  // Midpoints (rather than endpoints) keep every entry strictly inside
  // (-pi/2, pi/2) where the parameterization is well-behaved.
  static AngularGrid uniform(int m);

  // Minimal spacing between adjacent entries (radians). Requires size >= 2.
  double min_spacing() const;

  // Width of one sin-space bin for an m-point uniform grid.
  static double sin_bin_width(int m) { return 2.0 / m; }
};

}  // namespace isac

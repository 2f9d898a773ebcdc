#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace shprobe::sh {

// Highest angular degree the evaluation/coupling tables are built for.
inline constexpr int kMaxDegree = 12;

// Unit vector on S^2.  Callers are expected to keep |x^2+y^2+z^2 - 1|
// within 1e-12; checked entry points throw ArgumentError otherwise.
struct Direction {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;
};

Direction normalized(double x, double y, double z);
bool is_unit(const Direction& d, double tol = 1e-12);

// Real spherical-harmonic coefficient block up to `degree`, stored flat with
// index(l, m) = l^2 + l + m.  Contiguous per-l blocks of length 2l+1.
struct SHVector {
  int degree = 0;
  std::vector<double> coeffs;

  SHVector() : coeffs(1, 0.0) {}
  explicit SHVector(int deg)
      : degree(deg), coeffs(static_cast<std::size_t>((deg + 1) * (deg + 1)), 0.0) {}

  static std::size_t index(int l, int m) {
    return static_cast<std::size_t>(l * l + l + m);
  }
  double& at(int l, int m) { return coeffs[index(l, m)]; }
  double at(int l, int m) const { return coeffs[index(l, m)]; }
  std::size_t size() const { return coeffs.size(); }

  // Sum of squared coefficients at fixed l.
  double band_power(int l) const;
};

// Real orthonormal spherical harmonic Y_l^m.  Convention: derived from the
// complex harmonics with Condon-Shortley phase through the standard unitary
// real combination, which cancels the phase; hence
//   Y_1^{-1}, Y_1^0, Y_1^1 = sqrt(3/4pi) * (y, z, x).
// Orthonormal on S^2 with the surface measure (no 1/4pi weight).
double eval_sh(int l, int m, const Direction& dir);

// Feature vector phi_L: all Y_l^m for l <= degree, packed as SHVector.
SHVector feature_vector(int degree, const Direction& dir);

// Unchecked fast path used by quadrature and table builds; `out` must hold
// (degree+1)^2 entries.
void eval_basis(int degree, const Direction& dir, double* out);

// Value and tangential (surface) gradient of f(u) = sum_m c[m+l] Y_l^m(u)
// for one band l.  The gradient lies in the tangent plane at `dir`.
struct BandEval {
  double value;
  std::array<double, 3> grad;
};
BandEval eval_band_with_gradient(int l, std::span<const double> c,
                                 const Direction& dir);

// Product Gauss-Legendre(theta) x uniform(phi) spherical quadrature.
// `resolution` is the polar node count; the grid is exact for spherical
// polynomials of degree <= min(2*resolution - 1, 2*resolution).
struct QuadratureGrid {
  std::vector<Direction> nodes;
  std::vector<double> weights;  // sum to 4*pi
  std::size_t size() const { return nodes.size(); }
};

// Requires resolution >= 2*kMaxDegree + 2 so that all pairwise products of
// supported harmonics integrate exactly.
QuadratureGrid build_grid(int resolution);

// Internal-use grid exact for spherical polynomials of degree <= exactness.
QuadratureGrid build_grid_exact(int exactness);

// c_l^m = sum_k w_k f(n_k) Y_l^m(n_k).  `samples` must align with grid nodes.
SHVector project(std::span<const double> samples, const QuadratureGrid& grid,
                 int degree);

// f(dir) = sum_{l,m} c_l^m Y_l^m(dir).
double synthesize(const SHVector& c, const Direction& dir);

}  // namespace shprobe::sh

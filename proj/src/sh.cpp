#include "shprobe/sh.hpp"

#include <cmath>
#include <string>

#include "shprobe/errors.hpp"

namespace shprobe::sh {

namespace {

constexpr double kPi = 3.14159265358979323846264338;
constexpr double kFourPi = 4.0 * kPi;

// Normalization N(l,m) = sqrt((2l+1)/(4pi) * (l-m)!/(l+m)!).
double norm_factor(int l, int m) {
  double ratio = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) ratio *= static_cast<double>(k);
  return std::sqrt((2.0 * l + 1.0) / (kFourPi * ratio));
}

// On the unit sphere the real harmonics factor into a polynomial in z times
// Re/Im[(x+iy)^m]:
//   Y_l^0      = N(l,0) Q_l^0(z)
//   Y_l^{+m}   = sqrt(2) N(l,m) Q_l^m(z) Re[(x+iy)^m]
//   Y_l^{-m}   = sqrt(2) N(l,m) Q_l^m(z) Im[(x+iy)^m]
// with Q_l^m(z) = |P_l^m|(z) / sin^m(theta), a polynomial in z.  Everything
// below is polynomial in (x,y,z), so gradients stay finite at the poles;
// tangential gradients are obtained by projecting out the radial component.
struct QTable {
  // q[m] holds Q_l^m for the current l of an upward sweep.
  double q[kMaxDegree + 1][kMaxDegree + 1];   // q[l][m]
  double dq[kMaxDegree + 1][kMaxDegree + 1];  // dQ/dz

  void build(int lmax, double z) {
    q[0][0] = 1.0;
    dq[0][0] = 0.0;
    for (int m = 1; m <= lmax; ++m) {
      q[m][m] = (2.0 * m - 1.0) * q[m - 1][m - 1];
      dq[m][m] = 0.0;
    }
    for (int m = 0; m < lmax; ++m) {
      q[m + 1][m] = (2.0 * m + 1.0) * z * q[m][m];
      dq[m + 1][m] = (2.0 * m + 1.0) * q[m][m];
    }
    for (int m = 0; m <= lmax; ++m) {
      for (int l = m + 2; l <= lmax; ++l) {
        const double a = 2.0 * l - 1.0;
        const double b = static_cast<double>(l + m - 1);
        const double inv = 1.0 / static_cast<double>(l - m);
        q[l][m] = (a * z * q[l - 1][m] - b * q[l - 2][m]) * inv;
        dq[l][m] = (a * (q[l - 1][m] + z * dq[l - 1][m]) - b * dq[l - 2][m]) * inv;
      }
    }
  }
};

void check_degree(int l, const char* who) {
  if (l < 0 || l > kMaxDegree)
    throw ArgumentError(std::string(who) + ": degree " + std::to_string(l) +
                        " outside [0, " + std::to_string(kMaxDegree) + "]");
}

void check_unit(const Direction& d, const char* who) {
  if (!is_unit(d))
    throw ArgumentError(std::string(who) + ": direction is not unit length");
}

}  // namespace

Direction normalized(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (n < 1e-300) throw ArgumentError("normalized: zero vector");
  return Direction{x / n, y / n, z / n};
}

bool is_unit(const Direction& d, double tol) {
  return std::abs(d.x * d.x + d.y * d.y + d.z * d.z - 1.0) <= tol;
}

double SHVector::band_power(int l) const {
  double p = 0.0;
  for (int m = -l; m <= l; ++m) {
    const double c = at(l, m);
    p += c * c;
  }
  return p;
}

void eval_basis(int degree, const Direction& dir, double* out) {
  static thread_local QTable table;
  table.build(degree, dir.z);
  // Re/Im[(x+iy)^m]
  double re[kMaxDegree + 1], im[kMaxDegree + 1];
  re[0] = 1.0;
  im[0] = 0.0;
  for (int m = 1; m <= degree; ++m) {
    re[m] = dir.x * re[m - 1] - dir.y * im[m - 1];
    im[m] = dir.x * im[m - 1] + dir.y * re[m - 1];
  }
  const double sqrt2 = std::sqrt(2.0);
  for (int l = 0; l <= degree; ++l) {
    out[SHVector::index(l, 0)] = norm_factor(l, 0) * table.q[l][0];
    for (int m = 1; m <= l; ++m) {
      const double base = sqrt2 * norm_factor(l, m) * table.q[l][m];
      out[SHVector::index(l, m)] = base * re[m];
      out[SHVector::index(l, -m)] = base * im[m];
    }
  }
}

double eval_sh(int l, int m, const Direction& dir) {
  check_degree(l, "eval_sh");
  if (m < -l || m > l)
    throw ArgumentError("eval_sh: order m = " + std::to_string(m) +
                        " outside [-l, l]");
  check_unit(dir, "eval_sh");
  double buf[(kMaxDegree + 1) * (kMaxDegree + 1)];
  eval_basis(l, dir, buf);
  return buf[SHVector::index(l, m)];
}

SHVector feature_vector(int degree, const Direction& dir) {
  check_degree(degree, "feature_vector");
  check_unit(dir, "feature_vector");
  SHVector v(degree);
  eval_basis(degree, dir, v.coeffs.data());
  return v;
}

BandEval eval_band_with_gradient(int l, std::span<const double> c,
                                 const Direction& dir) {
  check_degree(l, "eval_band_with_gradient");
  if (c.size() != static_cast<std::size_t>(2 * l + 1))
    throw ArgumentError("eval_band_with_gradient: coefficient count mismatch");
  check_unit(dir, "eval_band_with_gradient");

  static thread_local QTable table;
  table.build(l, dir.z);
  double re[kMaxDegree + 1], im[kMaxDegree + 1];
  re[0] = 1.0;
  im[0] = 0.0;
  for (int m = 1; m <= l; ++m) {
    re[m] = dir.x * re[m - 1] - dir.y * im[m - 1];
    im[m] = dir.x * im[m - 1] + dir.y * re[m - 1];
  }

  // Accumulate value and the Cartesian gradient of the polynomial extension,
  // then project onto the tangent plane.
  double val = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
  {
    const double cm = c[l];  // m = 0
    val += cm * norm_factor(l, 0) * table.q[l][0];
    gz += cm * norm_factor(l, 0) * table.dq[l][0];
  }
  const double sqrt2 = std::sqrt(2.0);
  for (int m = 1; m <= l; ++m) {
    const double k = sqrt2 * norm_factor(l, m);
    const double cp = c[l + m], cn = c[l - m];
    const double q = table.q[l][m], dq = table.dq[l][m];
    // d/dx (x+iy)^m = m (x+iy)^{m-1}
    const double dre_dx = m * re[m - 1], dre_dy = -m * im[m - 1];
    const double dim_dx = m * im[m - 1], dim_dy = m * re[m - 1];
    val += k * q * (cp * re[m] + cn * im[m]);
    gx += k * q * (cp * dre_dx + cn * dim_dx);
    gy += k * q * (cp * dre_dy + cn * dim_dy);
    gz += k * dq * (cp * re[m] + cn * im[m]);
  }
  const double radial = gx * dir.x + gy * dir.y + gz * dir.z;
  return BandEval{val,
                  {gx - radial * dir.x, gy - radial * dir.y, gz - radial * dir.z}};
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

QuadratureGrid make_grid(int n_theta, int n_phi) {
  std::vector<double> gz, gw;
  gauss_legendre(n_theta, gz, gw);
  QuadratureGrid grid;
  grid.nodes.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  grid.weights.reserve(grid.nodes.capacity());
  const double wphi = 2.0 * kPi / n_phi;
  for (int i = 0; i < n_theta; ++i) {
    const double z = gz[i];
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n_phi; ++j) {
      const double phi = (2.0 * kPi * j) / n_phi;
      grid.nodes.push_back(Direction{s * std::cos(phi), s * std::sin(phi), z});
      grid.weights.push_back(gw[i] * wphi);
    }
  }
  return grid;
}

}  // namespace

QuadratureGrid build_grid(int resolution) {
  if (resolution < 2 * kMaxDegree + 2)
    throw ArgumentError("build_grid: resolution " + std::to_string(resolution) +
                        " below " + std::to_string(2 * kMaxDegree + 2));
  return make_grid(resolution, 2 * resolution + 1);
}

QuadratureGrid build_grid_exact(int exactness) {
  const int n_theta = exactness / 2 + 1;
  return make_grid(n_theta, exactness + 1);
}

SHVector project(std::span<const double> samples, const QuadratureGrid& grid,
                 int degree) {
  check_degree(degree, "project");
  if (samples.size() != grid.size())
    throw ArgumentError("project: sample count does not match grid");
  SHVector out(degree);
  std::vector<double> basis(out.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    eval_basis(degree, grid.nodes[k], basis.data());
    const double wf = grid.weights[k] * samples[k];
    for (std::size_t j = 0; j < out.size(); ++j) out.coeffs[j] += wf * basis[j];
  }
  return out;
}

double synthesize(const SHVector& c, const Direction& dir) {
  std::vector<double> basis(c.size());
  eval_basis(c.degree, dir, basis.data());
  double f = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) f += c.coeffs[j] * basis[j];
  return f;
}

}  // namespace shprobe::sh

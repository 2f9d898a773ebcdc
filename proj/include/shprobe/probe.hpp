#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "shprobe/sh.hpp"

namespace shprobe::probe {

inline constexpr std::size_t kFeatureGuard = 200000;

// Deterministic graded enumeration of all monomials of total degree <= d in
// K variables (constant term first, then degree 1 in variable order, ...).
// Each monomial is stored as (parent index, variable index) so evaluation is
// one multiply per monomial.
class MonomialBasis {
 public:
  MonomialBasis(int n_vars, int degree);

  std::size_t size() const { return parent_.size(); }
  int n_vars() const { return n_vars_; }
  int degree() const { return degree_; }

  // out must hold size() entries; vars holds n_vars() entries.
  void eval_into(const double* vars, double* out) const;

 private:
  int n_vars_ = 0;
  int degree_ = 0;
  std::vector<std::int32_t> parent_;
  std::vector<std::int32_t> var_;
};

// All monomials of total degree <= d in the entries of phi (constant 1
// included), in the basis order above.
std::vector<double> poly_features(const sh::SHVector& phi, int d);

struct PolyProbeConfig {
  int L = 2;        // feature degree
  int d = 2;        // polynomial degree
  double ridge = 1e-10;
  int n = 4000;     // sample count
};

enum class Solver { NormalEquations, QR };

struct ProbeResult {
  Eigen::VectorXd weights;  // raw monomial basis
  double r_squared = 0.0;
  double mse = 0.0;
  int L = 0, d = 0, l_target = -1;
  // Evaluation-half target variance was ~0; r_squared reported as 1 when the
  // fit is exact, else 0.
  bool degenerate_variance = false;
  // ridge == 0 and rank-deficient: solved by minimum-norm pseudo-inverse.
  bool pinv_fallback = false;
  double target_variance = 0.0;  // on the held-out half
};

// Ridge least squares of targets on poly_features(phi_L(dir), d).  Training
// uses even-index samples, evaluation the odd-index half; R^2 and MSE are
// reported on the held-out half.
ProbeResult fit_poly_probe(const std::vector<sh::Direction>& dirs,
                           const std::vector<double>& targets,
                           const PolyProbeConfig& cfg,
                           Solver solver = Solver::NormalEquations);

// Random unit-norm coefficient combination at a single degree l; pure
// l-content by construction, reproducible from the seed.
struct SynthTarget {
  int l = 0;
  std::vector<double> c;  // unit norm, length 2l+1
  double operator()(const sh::Direction& dir) const;
};

SynthTarget synth_target(int l, std::uint64_t coeff_seed);

// Uniformly distributed unit vectors, deterministic in (seed, index).
std::vector<sh::Direction> sample_directions(int n, std::uint64_t seed);

struct GridCell {
  int L = 0, d = 0, l = 0;
  ProbeResult result;
};

struct GridRow {
  int L = 0, d = 0;
  std::vector<GridCell> cells;   // l = 0 .. d*L + l_max_extra
  double r2_at_ceiling = 0.0;    // R^2(l = d*L)
  double r2_above_ceiling = 0.0; // R^2(l = d*L + 1)
  double delta_r2 = 0.0;
};

// One least-squares probe per (L, d, l) cell; the design matrix is shared
// across the l-sweep of a cell.  Cells draw independent RNG substreams, so
// results are identical for any `threads`.
std::vector<GridRow> saturation_grid(const std::vector<std::pair<int, int>>& cells,
                                     int l_max_extra, int n, std::uint64_t seed,
                                     int threads = 1);

// The eight (L, d) cells with L in {1,2,3}, d in {2,3,4}, d*L <= 9.
std::vector<std::pair<int, int>> default_grid_cells();

struct HardCeiling {
  double mse_within = 0.0;   // linear probe, target bandlimited at <= band
  double mse_above = 0.0;    // linear probe, pure (L+1)-degree target
  double var_above = 0.0;    // held-out variance of the above-ceiling target
};

// Linear (d = 1) probe at feature degree L.
HardCeiling hard_ceiling_check(int L, int band, std::uint64_t seed, int n = 4000);

}  // namespace shprobe::probe

#include "shprobe/probe.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>

#include "shprobe/errors.hpp"
#include "shprobe/rng.hpp"

namespace shprobe::probe {

namespace {

// Number of monomials of degree <= d in k variables: C(k + d, d).
std::size_t monomial_count(int k, int d) {
  double c = 1.0;
  for (int i = 1; i <= d; ++i) c = c * (k + i) / i;
  return static_cast<std::size_t>(c + 0.5);
}

}  // namespace

MonomialBasis::MonomialBasis(int n_vars, int degree)
    : n_vars_(n_vars), degree_(degree) {
  if (n_vars < 1 || degree < 0) throw ArgumentError("MonomialBasis: bad shape");
  if (monomial_count(n_vars, degree) > kFeatureGuard)
    throw ResourceError("MonomialBasis: monomial count " +
                        std::to_string(monomial_count(n_vars, degree)) +
                        " exceeds guard");
  parent_.push_back(-1);  // constant 1
  var_.push_back(-1);
  std::size_t level_begin = 0, level_end = 1;
  for (int deg = 1; deg <= degree; ++deg) {
    const std::size_t next_begin = parent_.size();
    for (std::size_t p = level_begin; p < level_end; ++p) {
      const int first_var = (var_[p] < 0) ? 0 : var_[p];
      for (int v = first_var; v < n_vars; ++v) {
        parent_.push_back(static_cast<std::int32_t>(p));
        var_.push_back(v);
      }
    }
    level_begin = next_begin;
    level_end = parent_.size();
  }
}

void MonomialBasis::eval_into(const double* vars, double* out) const {
  out[0] = 1.0;
  for (std::size_t i = 1; i < parent_.size(); ++i)
    out[i] = out[parent_[i]] * vars[var_[i]];
}

std::vector<double> poly_features(const sh::SHVector& phi, int d) {
  const MonomialBasis basis(static_cast<int>(phi.size()), d);
  std::vector<double> out(basis.size());
  basis.eval_into(phi.coeffs.data(), out.data());
  return out;
}

double SynthTarget::operator()(const sh::Direction& dir) const {
  return sh::eval_band_with_gradient(l, c, dir).value;
}

SynthTarget synth_target(int l, std::uint64_t coeff_seed) {
  if (l < 0 || l > sh::kMaxDegree)
    throw ArgumentError("synth_target: degree out of range");
  SynthTarget t;
  t.l = l;
  t.c.resize(static_cast<std::size_t>(2 * l + 1));
  const CounterRng rng(coeff_seed);
  double norm2 = 0.0;
  for (std::size_t m = 0; m < t.c.size(); ++m) {
    t.c[m] = rng.normal(m);
    norm2 += t.c[m] * t.c[m];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : t.c) v *= inv;
  return t;
}

std::vector<sh::Direction> sample_directions(int n, std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<sh::Direction> dirs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 2.0 * rng.uniform(2 * static_cast<std::uint64_t>(i)) - 1.0;
    const double phi =
        6.283185307179586476925287 * rng.uniform(2 * static_cast<std::uint64_t>(i) + 1);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    dirs[static_cast<std::size_t>(i)] =
        sh::Direction{s * std::cos(phi), s * std::sin(phi), z};
  }
  return dirs;
}

namespace {

struct DesignMatrix {
  Eigen::MatrixXd train;  // even-index samples
  Eigen::MatrixXd eval;   // odd-index samples
  Eigen::VectorXd scale;  // per-column train RMS used for conditioning
};

DesignMatrix build_design(const std::vector<sh::Direction>& dirs, int L, int d) {
  const MonomialBasis basis((L + 1) * (L + 1), d);
  const std::size_t n = dirs.size();
  const std::size_t n_train = (n + 1) / 2, n_eval = n / 2;
  DesignMatrix dm;
  dm.train.resize(static_cast<Eigen::Index>(n_train),
                  static_cast<Eigen::Index>(basis.size()));
  dm.eval.resize(static_cast<Eigen::Index>(n_eval),
                 static_cast<Eigen::Index>(basis.size()));
  std::vector<double> feats((L + 1) * (L + 1));
  std::vector<double> row(basis.size());
  for (std::size_t i = 0; i < n; ++i) {
    sh::eval_basis(L, dirs[i], feats.data());
    basis.eval_into(feats.data(), row.data());
    auto dst = (i % 2 == 0) ? dm.train.row(static_cast<Eigen::Index>(i / 2))
                            : dm.eval.row(static_cast<Eigen::Index>(i / 2));
    for (std::size_t j = 0; j < row.size(); ++j)
      dst[static_cast<Eigen::Index>(j)] = row[j];
  }
  dm.scale = dm.train.colwise().norm() /
             std::sqrt(static_cast<double>(std::max<std::size_t>(n_train, 1)));
  for (Eigen::Index j = 0; j < dm.scale.size(); ++j)
    if (dm.scale[j] < 1e-300) dm.scale[j] = 1.0;
  return dm;
}

struct FitOutput {
  Eigen::VectorXd weights;
  double mse = 0.0;
  double r2 = 0.0;
  double var = 0.0;
  bool degenerate = false;
  bool pinv = false;
};

FitOutput solve_probe(const DesignMatrix& dm, const std::vector<double>& targets,
                      double ridge, Solver solver) {
  const std::size_t n = targets.size();
  Eigen::VectorXd y_train(dm.train.rows()), y_eval(dm.eval.rows());
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 2 == 0)
      y_train[static_cast<Eigen::Index>(i / 2)] = targets[i];
    else
      y_eval[static_cast<Eigen::Index>(i / 2)] = targets[i];
  }

  const Eigen::MatrixXd x_scaled = dm.train * dm.scale.cwiseInverse().asDiagonal();
  const Eigen::Index p = x_scaled.cols();
  Eigen::VectorXd w_scaled;
  bool pinv = false;
  if (solver == Solver::QR) {
    if (ridge > 0.0) {
      Eigen::MatrixXd aug(x_scaled.rows() + p, p);
      aug.topRows(x_scaled.rows()) = x_scaled;
      aug.bottomRows(p) =
          std::sqrt(ridge) * Eigen::MatrixXd::Identity(p, p);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(aug.rows());
      rhs.head(x_scaled.rows()) = y_train;
      w_scaled = aug.householderQr().solve(rhs);
    } else {
      w_scaled = x_scaled.householderQr().solve(y_train);
    }
  } else {
    if (ridge > 0.0) {
      const Eigen::MatrixXd gram =
          x_scaled.transpose() * x_scaled +
          ridge * Eigen::MatrixXd::Identity(p, p);
      w_scaled = gram.ldlt().solve(x_scaled.transpose() * y_train);
    } else {
      // Unregularized: minimum-norm solve through the SVD of the design
      // itself, flagged when the rank falls short.
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(
          x_scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const auto& sv = svd.singularValues();
      const double tol = 1e-10 * (sv.size() > 0 ? sv[0] : 1.0);
      int rank = 0;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++rank;
      if (rank < std::min<Eigen::Index>(p, x_scaled.rows())) pinv = true;
      if (rank < p) pinv = true;
      Eigen::VectorXd coef = svd.matrixU().transpose() * y_train;
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        coef[i] = sv[i] > tol ? coef[i] / sv[i] : 0.0;
      w_scaled = svd.matrixV() * coef;
    }
  }

  FitOutput out;
  out.pinv = pinv;
  out.weights = dm.scale.cwiseInverse().asDiagonal() * w_scaled;
  const Eigen::VectorXd pred = dm.eval * out.weights;
  const Eigen::VectorXd resid = pred - y_eval;
  out.mse = resid.squaredNorm() / static_cast<double>(y_eval.size());
  const double mean = y_eval.mean();
  out.var = (y_eval.array() - mean).square().sum() /
            static_cast<double>(y_eval.size());
  if (out.var <= 1e-18) {
    out.degenerate = true;
    out.r2 = (out.mse <= 1e-16) ? 1.0 : 0.0;
  } else {
    out.r2 = 1.0 - out.mse / out.var;
  }
  return out;
}

}  // namespace

ProbeResult fit_poly_probe(const std::vector<sh::Direction>& dirs,
                           const std::vector<double>& targets,
                           const PolyProbeConfig& cfg, Solver solver) {
  if (dirs.size() != targets.size())
    throw ArgumentError("fit_poly_probe: sample count mismatch");
  if (dirs.size() < 4) throw ArgumentError("fit_poly_probe: too few samples");
  if (cfg.ridge < 0.0) throw ArgumentError("fit_poly_probe: negative ridge");
  const DesignMatrix dm = build_design(dirs, cfg.L, cfg.d);
  const FitOutput fit = solve_probe(dm, targets, cfg.ridge, solver);
  ProbeResult res;
  res.weights = fit.weights;
  res.mse = fit.mse;
  res.r_squared = fit.r2;
  res.L = cfg.L;
  res.d = cfg.d;
  res.degenerate_variance = fit.degenerate;
  res.pinv_fallback = fit.pinv;
  res.target_variance = fit.var;
  return res;
}

std::vector<std::pair<int, int>> default_grid_cells() {
  std::vector<std::pair<int, int>> cells;
  for (int L = 1; L <= 3; ++L)
    for (int d = 2; d <= 4; ++d)
      if (d * L <= 9) cells.push_back({L, d});
  return cells;
}

std::vector<GridRow> saturation_grid(const std::vector<std::pair<int, int>>& cells,
                                     int l_max_extra, int n, std::uint64_t seed,
                                     int threads) {
  if (n < 8) throw ArgumentError("saturation_grid: sample count too small");
  if (l_max_extra < 1)
    throw ArgumentError("saturation_grid: l_max_extra must cover d*L + 1");
  std::vector<GridRow> rows(cells.size());
  const CounterRng root(seed);

  auto run_cell = [&](std::size_t ci) {
    const auto [L, d] = cells[ci];
    if (d * L + l_max_extra > sh::kMaxDegree)
      throw ArgumentError("saturation_grid: sweep exceeds supported degree");
    GridRow row;
    row.L = L;
    row.d = d;
    const CounterRng cell_rng = root.substream(ci);
    const auto dirs = sample_directions(n, cell_rng.bits(1));
    const DesignMatrix dm = build_design(dirs, L, d);
    for (int l = 0; l <= d * L + l_max_extra; ++l) {
      const SynthTarget target =
          synth_target(l, cell_rng.bits(100 + static_cast<std::uint64_t>(l)));
      std::vector<double> values(dirs.size());
      for (std::size_t s = 0; s < dirs.size(); ++s) values[s] = target(dirs[s]);
      const FitOutput fit = solve_probe(dm, values, 1e-10, Solver::NormalEquations);
      GridCell cell;
      cell.L = L;
      cell.d = d;
      cell.l = l;
      cell.result.weights = fit.weights;
      cell.result.mse = fit.mse;
      cell.result.r_squared = fit.r2;
      cell.result.L = L;
      cell.result.d = d;
      cell.result.l_target = l;
      cell.result.degenerate_variance = fit.degenerate;
      cell.result.pinv_fallback = fit.pinv;
      cell.result.target_variance = fit.var;
      row.cells.push_back(std::move(cell));
    }
    row.r2_at_ceiling = row.cells[static_cast<std::size_t>(d * L)].result.r_squared;
    row.r2_above_ceiling =
        row.cells[static_cast<std::size_t>(d * L + 1)].result.r_squared;
    row.delta_r2 = row.r2_at_ceiling - row.r2_above_ceiling;
    rows[ci] = std::move(row);
  };

  if (threads <= 1 || cells.size() <= 1) {
    for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), cells.size());
    std::vector<std::exception_ptr> errors(n_workers);
    std::mutex mu;
    for (std::size_t w = 0; w < n_workers; ++w)
      pool.emplace_back([&, w]() {
        try {
          while (true) {
            std::size_t ci;
            {
              std::lock_guard<std::mutex> lock(mu);
              if (next >= cells.size()) return;
              ci = next++;
            }
            run_cell(ci);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return rows;
}

HardCeiling hard_ceiling_check(int L, int band, std::uint64_t seed, int n) {
  if (band > L) throw ArgumentError("hard_ceiling_check: band must be <= L");
  if (L + 1 > sh::kMaxDegree)
    throw ArgumentError("hard_ceiling_check: L + 1 exceeds supported degree");
  const CounterRng rng(seed);
  const auto dirs = sample_directions(n, rng.bits(1));
  const DesignMatrix dm = build_design(dirs, L, 1);

  // Bandlimited target: random coefficients over all l <= band.
  sh::SHVector coeffs(band);
  double norm2 = 0.0;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    coeffs.coeffs[j] = rng.normal(100 + j);
    norm2 += coeffs.coeffs[j] * coeffs.coeffs[j];
  }
  for (double& v : coeffs.coeffs) v /= std::sqrt(norm2);
  std::vector<double> within(dirs.size());
  for (std::size_t s = 0; s < dirs.size(); ++s)
    within[s] = sh::synthesize(coeffs, dirs[s]);

  const SynthTarget above = synth_target(L + 1, rng.bits(2));
  std::vector<double> above_vals(dirs.size());
  for (std::size_t s = 0; s < dirs.size(); ++s) above_vals[s] = above(dirs[s]);

  HardCeiling out;
  const FitOutput f_within = solve_probe(dm, within, 1e-10, Solver::NormalEquations);
  const FitOutput f_above =
      solve_probe(dm, above_vals, 1e-10, Solver::NormalEquations);
  out.mse_within = f_within.mse;
  out.mse_above = f_above.mse;
  out.var_above = f_above.var;
  return out;
}

}  // namespace shprobe::probe

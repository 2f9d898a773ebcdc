#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shprobe::metrics {

// y = force MAE / sigma_F, dimensionless.
struct NormalizedError {
  double y = 0.0;
  double mae = 0.0;      // kcal/mol/A
  double sigma_f = 0.0;  // kcal/mol/A
};

NormalizedError normalized_error(double force_mae, double sigma_f);

// Per-component convention: sum_i |F_pred - F_true| / (3 N_atoms), averaged
// over frames.
double force_mae(const std::vector<Eigen::MatrixX3d>& pred,
                 const std::vector<Eigen::MatrixX3d>& truth);

enum class RhoUndefined { NonPositiveDenominator };

// Recovery fraction (y_low - y_arch) / (y_low - y_high).  Undefined (not an
// error) when the anchor gap y_low - y_high is non-positive; callers fall
// back to the raw gain delta = y_low - y_arch.
struct Recovery {
  std::optional<double> rho;
  std::optional<RhoUndefined> undefined_reason;
  double delta = 0.0;
};

Recovery recovery_fraction(double y_low, double y_arch, double y_high);

struct Ci {
  double lo = 0.0, hi = 0.0;
};

// Ratio rho_at / rho_above quantifying how abruptly recovery collapses
// across one degree step.
struct SharpnessResult {
  enum class Kind { Exact, LowerBound, DeltaFallback, Undefined };
  Kind kind = Kind::Undefined;
  std::optional<double> value;
};

SharpnessResult sharpness(double rho_at, double rho_above);

// CI-aware variant: when the CI of rho_above covers zero the ratio is
// reported as a lower bound from the CI endpoints (lo of the numerator over
// hi of the denominator).
SharpnessResult sharpness(double rho_at, const Ci& ci_at, double rho_above,
                          const Ci& ci_above);

// Fallback when rho itself is undefined at either degree.
SharpnessResult sharpness_from_deltas(double delta_at, double delta_above);

// 1 - <|dF_pred - F_inj|^2> / <|F_inj|^2> over frames.
double r2_injected(const std::vector<Eigen::MatrixX3d>& delta_f_pred,
                   const std::vector<Eigen::MatrixX3d>& f_inj);

struct BootstrapCi {
  double mean = 0.0;  // sample mean of the input values
  double lo = 0.0, hi = 0.0;
};

// Percentile 95% CI of the bootstrap mean distribution: B resamples with
// replacement, deterministic in (values, B, seed).
BootstrapCi bootstrap_mean_ci(const std::vector<double>& values, int B,
                              std::uint64_t rng_seed);

struct ClusterContrast {
  double ratio = 0.0;        // mean(at) / mean(above) on the full sample
  double diff = 0.0;         // mean(at) - mean(above)
  Ci ratio_ci;
  Ci diff_ci;
  int excluded_resamples = 0;  // resamples with non-positive denominator
  std::vector<double> leave_one_out_ratios;
};

// Hierarchical bootstrap: resample cluster indices with replacement, compute
// the ratio and difference of cluster means per resample, report percentile
// 95% CIs.  Resamples whose denominator mean is non-positive are excluded
// from the ratio distribution and counted.
ClusterContrast cluster_bootstrap_contrast(const std::vector<double>& delta_at,
                                           const std::vector<double>& delta_above,
                                           int B, std::uint64_t rng_seed);

// One row of the diagnostic report.
struct MetricReport {
  std::optional<double> rho;
  double delta = 0.0;
  std::optional<double> xi;
  std::optional<double> r2_inj;
  std::optional<double> ci_low, ci_high;
  int n_seeds = 0;
  std::optional<std::string> undefined_reason;
};

std::string to_json(const MetricReport& report);

}  // namespace shprobe::metrics

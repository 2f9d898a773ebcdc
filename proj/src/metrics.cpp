#include "shprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "shprobe/errors.hpp"
#include "shprobe/rng.hpp"

namespace shprobe::metrics {

NormalizedError normalized_error(double force_mae, double sigma_f) {
  if (sigma_f <= 0.0)
    throw ArgumentError("normalized_error: sigma_f must be positive");
  return NormalizedError{force_mae / sigma_f, force_mae, sigma_f};
}

double force_mae(const std::vector<Eigen::MatrixX3d>& pred,
                 const std::vector<Eigen::MatrixX3d>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw ArgumentError("force_mae: frame count mismatch");
  double acc = 0.0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    if (pred[f].rows() != truth[f].rows())
      throw ArgumentError("force_mae: shape mismatch");
    acc += (pred[f] - truth[f]).cwiseAbs().sum() /
           static_cast<double>(pred[f].size());
  }
  return acc / static_cast<double>(pred.size());
}

Recovery recovery_fraction(double y_low, double y_arch, double y_high) {
  Recovery r;
  r.delta = y_low - y_arch;
  const double denom = y_low - y_high;
  if (denom > 0.0) {
    r.rho = r.delta / denom;
  } else {
    r.undefined_reason = RhoUndefined::NonPositiveDenominator;
  }
  return r;
}

SharpnessResult sharpness(double rho_at, double rho_above) {
  SharpnessResult s;
  if (rho_above > 0.0) {
    s.kind = SharpnessResult::Kind::Exact;
    s.value = rho_at / rho_above;
  }
  return s;
}

SharpnessResult sharpness(double rho_at, const Ci& ci_at, double rho_above,
                          const Ci& ci_above) {
  if (ci_above.lo > 0.0) return sharpness(rho_at, rho_above);
  SharpnessResult s;
  if (ci_above.hi > 0.0) {
    s.kind = SharpnessResult::Kind::LowerBound;
    s.value = ci_at.lo / ci_above.hi;
  }
  return s;
}

SharpnessResult sharpness_from_deltas(double delta_at, double delta_above) {
  SharpnessResult s;
  if (delta_above != 0.0) {
    s.kind = SharpnessResult::Kind::DeltaFallback;
    s.value = delta_at / delta_above;
  }
  return s;
}

double r2_injected(const std::vector<Eigen::MatrixX3d>& delta_f_pred,
                   const std::vector<Eigen::MatrixX3d>& f_inj) {
  if (delta_f_pred.size() != f_inj.size() || f_inj.empty())
    throw ArgumentError("r2_injected: frame count mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t f = 0; f < f_inj.size(); ++f) {
    if (delta_f_pred[f].rows() != f_inj[f].rows())
      throw ArgumentError("r2_injected: shape mismatch");
    num += (delta_f_pred[f] - f_inj[f]).squaredNorm();
    den += f_inj[f].squaredNorm();
  }
  if (den <= 0.0) throw ArgumentError("r2_injected: zero injected power");
  return 1.0 - num / den;
}

namespace {

// Percentile by the deterministic nearest-rank rule on the sorted bootstrap
// statistics: index ceil(q * B) - 1.
double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = std::ceil(q * static_cast<double>(sorted.size())) - 1.0;
  const auto idx = static_cast<std::size_t>(
      std::clamp(pos, 0.0, static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

}  // namespace

BootstrapCi bootstrap_mean_ci(const std::vector<double>& values, int B,
                              std::uint64_t rng_seed) {
  if (values.size() < 2)
    throw ArgumentError("bootstrap_mean_ci: need at least two values");
  if (B < 1000) throw ArgumentError("bootstrap_mean_ci: B must be >= 1000");
  const std::size_t n = values.size();
  const CounterRng rng(rng_seed);
  std::vector<double> means(static_cast<std::size_t>(B));
  std::uint64_t draw = 0;
  for (int b = 0; b < B; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sum += values[rng.below(draw++, n)];
    means[static_cast<std::size_t>(b)] = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  BootstrapCi ci;
  double s = 0.0;
  for (double v : values) s += v;
  ci.mean = s / static_cast<double>(n);
  ci.lo = percentile(means, 0.025);
  ci.hi = percentile(means, 0.975);
  return ci;
}

ClusterContrast cluster_bootstrap_contrast(const std::vector<double>& delta_at,
                                           const std::vector<double>& delta_above,
                                           int B, std::uint64_t rng_seed) {
  const std::size_t n = delta_at.size();
  if (n < 2 || delta_above.size() != n)
    throw ArgumentError(
        "cluster_bootstrap_contrast: need >= 2 equal-count clusters");
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };

  ClusterContrast out;
  const double m_at = mean_of(delta_at);
  const double m_above = mean_of(delta_above);
  out.diff = m_at - m_above;
  out.ratio = m_above != 0.0 ? m_at / m_above
                             : std::numeric_limits<double>::quiet_NaN();

  const CounterRng rng(rng_seed);
  std::vector<double> ratios, diffs;
  ratios.reserve(static_cast<std::size_t>(B));
  diffs.reserve(static_cast<std::size_t>(B));
  std::uint64_t draw = 0;
  for (int b = 0; b < B; ++b) {
    double s_at = 0.0, s_above = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = rng.below(draw++, n);
      s_at += delta_at[idx];
      s_above += delta_above[idx];
    }
    const double r_at = s_at / static_cast<double>(n);
    const double r_above = s_above / static_cast<double>(n);
    diffs.push_back(r_at - r_above);
    if (r_above > 0.0)
      ratios.push_back(r_at / r_above);
    else
      ++out.excluded_resamples;
  }
  std::sort(ratios.begin(), ratios.end());
  std::sort(diffs.begin(), diffs.end());
  out.ratio_ci = Ci{percentile(ratios, 0.025), percentile(ratios, 0.975)};
  out.diff_ci = Ci{percentile(diffs, 0.025), percentile(diffs, 0.975)};

  for (std::size_t drop = 0; drop < n; ++drop) {
    double s_at = 0.0, s_above = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == drop) continue;
      s_at += delta_at[i];
      s_above += delta_above[i];
    }
    out.leave_one_out_ratios.push_back(s_at / s_above);
  }
  return out;
}

std::string to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["rho"] = report.rho ? nlohmann::ordered_json(*report.rho)
                        : nlohmann::ordered_json(nullptr);
  j["delta"] = report.delta;
  j["xi"] = report.xi ? nlohmann::ordered_json(*report.xi)
                      : nlohmann::ordered_json(nullptr);
  j["r2_inj"] = report.r2_inj ? nlohmann::ordered_json(*report.r2_inj)
                              : nlohmann::ordered_json(nullptr);
  j["ci_low"] = report.ci_low ? nlohmann::ordered_json(*report.ci_low)
                              : nlohmann::ordered_json(nullptr);
  j["ci_high"] = report.ci_high ? nlohmann::ordered_json(*report.ci_high)
                                : nlohmann::ordered_json(nullptr);
  j["n_seeds"] = report.n_seeds;
  j["undefined_reason"] = report.undefined_reason
                              ? nlohmann::ordered_json(*report.undefined_reason)
                              : nlohmann::ordered_json(nullptr);
  return j.dump();
}

}  // namespace shprobe::metrics

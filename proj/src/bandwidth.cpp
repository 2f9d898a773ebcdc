#include "shprobe/bandwidth.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "shprobe/errors.hpp"
#include "shprobe/rng.hpp"

namespace shprobe::bandwidth {

NeighborDensity neighbor_density_coeffs(const inject::Positions& positions,
                                        int center, const ShellKernel& kernel) {
  if (center < 0 || center >= positions.rows())
    throw ArgumentError("neighbor_density_coeffs: center index out of range");
  if (kernel.r_cut <= 0.0)
    throw ArgumentError("neighbor_density_coeffs: r_cut must be positive");
  if (kernel.l_max < 0 || kernel.l_max > sh::kMaxDegree)
    throw ArgumentError("neighbor_density_coeffs: l_max out of range");

  NeighborDensity out;
  out.coeffs = sh::SHVector(kernel.l_max);
  std::vector<double> basis(out.coeffs.size());
  const Eigen::Vector3d c = positions.row(center).transpose();
  for (Eigen::Index j = 0; j < positions.rows(); ++j) {
    if (j == center) continue;
    const Eigen::Vector3d d = positions.row(j).transpose() - c;
    const double r = d.norm();
    if (r > kernel.r_cut || r < 1e-12) continue;
    const double t = (r - kernel.mu) / kernel.sigma;
    const double g = std::exp(-0.5 * t * t);
    const sh::Direction dir{d.x() / r, d.y() / r, d.z() / r};
    sh::eval_basis(kernel.l_max, dir, basis.data());
    for (std::size_t q = 0; q < basis.size(); ++q)
      out.coeffs.coeffs[q] += g * basis[q];
    ++out.neighbor_count;
  }
  out.empty = (out.neighbor_count == 0);
  return out;
}

BandwidthProfile bandwidth_lstar(const sh::SHVector& coeffs, double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw ArgumentError("bandwidth_lstar: threshold must be in (0, 1]");
  BandwidthProfile out;
  out.w.resize(static_cast<std::size_t>(coeffs.degree) + 1, 0.0);
  double total = 0.0;
  for (int l = 0; l <= coeffs.degree; ++l) {
    out.w[static_cast<std::size_t>(l)] = coeffs.band_power(l);
    total += out.w[static_cast<std::size_t>(l)];
  }
  if (total <= 0.0) {
    out.undefined = true;
    out.lstar = -1;
    return out;
  }
  for (double& v : out.w) v /= total;
  double cum = 0.0;
  out.lstar = coeffs.degree;
  for (int l = 0; l <= coeffs.degree; ++l) {
    cum += out.w[static_cast<std::size_t>(l)];
    // Tolerance absorbs accumulation rounding at threshold = 1.
    if (cum >= threshold - 1e-12) {
      out.lstar = l;
      break;
    }
  }
  return out;
}

BandwidthSummary dataset_bandwidth(const std::vector<xyz::PointCloud>& groups,
                                   const ShellKernel& kernel, double threshold,
                                   int bootstrap_b, std::uint64_t seed,
                                   const AtomFilter& filter) {
  if (groups.empty()) throw ArgumentError("dataset_bandwidth: empty dataset");
  BandwidthSummary out;
  out.histogram.assign(static_cast<std::size_t>(kernel.l_max) + 1, 0);
  std::vector<std::vector<int>> per_group;
  std::vector<int> pooled;
  for (const auto& group : groups) {
    // Apply the caller's atom filter (e.g. heavy atoms only) before both
    // center selection and the neighbor sums.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < group.positions.rows(); ++i)
      if (!filter || filter(group.symbols[static_cast<std::size_t>(i)]))
        keep.push_back(i);
    inject::Positions filtered(static_cast<Eigen::Index>(keep.size()), 3);
    for (std::size_t i = 0; i < keep.size(); ++i)
      filtered.row(static_cast<Eigen::Index>(i)) = group.positions.row(keep[i]);
    std::vector<int> lstars;
    for (Eigen::Index i = 0; i < filtered.rows(); ++i) {
      const NeighborDensity density =
          neighbor_density_coeffs(filtered, static_cast<int>(i), kernel);
      if (density.empty) {
        ++out.skipped_empty;
        continue;
      }
      const BandwidthProfile profile = bandwidth_lstar(density.coeffs, threshold);
      if (profile.undefined) {
        ++out.skipped_empty;
        continue;
      }
      lstars.push_back(profile.lstar);
      pooled.push_back(profile.lstar);
      ++out.histogram[static_cast<std::size_t>(profile.lstar)];
    }
    per_group.push_back(std::move(lstars));
  }
  if (pooled.empty())
    throw ArgumentError("dataset_bandwidth: no atoms with neighbors");
  out.atom_count = pooled.size();

  std::vector<int> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  out.median_lstar = (n % 2 == 1)
                         ? sorted[n / 2]
                         : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::size_t le4 = 0;
  for (int v : pooled)
    if (v <= 4) ++le4;
  out.p_le4 = static_cast<double>(le4) / static_cast<double>(n);

  // Group-level bootstrap for the P(lstar <= 4) interval.
  if (bootstrap_b > 0 && per_group.size() >= 2) {
    const CounterRng rng(seed);
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(bootstrap_b));
    std::uint64_t draw = 0;
    for (int b = 0; b < bootstrap_b; ++b) {
      std::size_t count = 0, total = 0;
      for (std::size_t g = 0; g < per_group.size(); ++g) {
        const auto& grp = per_group[rng.below(draw++, per_group.size())];
        total += grp.size();
        for (int v : grp)
          if (v <= 4) ++count;
      }
      if (total > 0)
        stats.push_back(static_cast<double>(count) / static_cast<double>(total));
    }
    std::sort(stats.begin(), stats.end());
    auto pick = [&](double q) {
      const double pos = std::ceil(q * static_cast<double>(stats.size())) - 1.0;
      return stats[static_cast<std::size_t>(
          std::clamp(pos, 0.0, static_cast<double>(stats.size() - 1)))];
    };
    if (!stats.empty()) out.p_le4_ci = metrics::Ci{pick(0.025), pick(0.975)};
  } else {
    out.p_le4_ci = metrics::Ci{out.p_le4, out.p_le4};
  }
  return out;
}

EnergySpectrum natural_energy_spectrum(
    const std::vector<inject::Configuration>& dataset, const FrameSpec& frame,
    int l_max) {
  if (dataset.empty())
    throw ArgumentError("natural_energy_spectrum: empty dataset");
  if (l_max < 1 || l_max > sh::kMaxDegree)
    throw ArgumentError("natural_energy_spectrum: l_max out of range");
  const int p = (l_max + 1) * (l_max + 1);
  const Eigen::Index n = static_cast<Eigen::Index>(dataset.size());

  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd energies(n);
  std::vector<double> basis(static_cast<std::size_t>(p));
  for (Eigen::Index f = 0; f < n; ++f) {
    const auto& cfg = dataset[static_cast<std::size_t>(f)];
    const inject::FrameResult fr =
        inject::body_frame(cfg.positions, frame.i, frame.j, frame.k);
    const sh::Direction u = inject::canonical_direction(cfg.positions, fr, frame.a);
    sh::eval_basis(l_max, u, basis.data());
    for (int q = 0; q < p; ++q) design(f, q) = basis[static_cast<std::size_t>(q)];
    energies[f] = cfg.energy;
  }
  energies.array() -= energies.mean();

  EnergySpectrum out;
  Eigen::VectorXd coeffs;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) {
    out.ridge_fallback = true;
    const Eigen::MatrixXd gram = design.transpose() * design +
                                 1e-8 * Eigen::MatrixXd::Identity(p, p);
    coeffs = gram.ldlt().solve(design.transpose() * energies);
  } else {
    coeffs = qr.solve(energies);
  }

  sh::SHVector fitted(l_max);
  for (int q = 0; q < p; ++q) fitted.coeffs[static_cast<std::size_t>(q)] = coeffs[q];
  out.power.resize(static_cast<std::size_t>(l_max) + 1);
  double angular = 0.0;
  for (int l = 0; l <= l_max; ++l) {
    out.power[static_cast<std::size_t>(l)] = fitted.band_power(l);
    if (l >= 1) angular += out.power[static_cast<std::size_t>(l)];
  }
  if (angular > 0.0) {
    double above2 = 0.0, above4 = 0.0;
    for (int l = 3; l <= l_max; ++l) above2 += out.power[static_cast<std::size_t>(l)];
    for (int l = 5; l <= l_max; ++l) above4 += out.power[static_cast<std::size_t>(l)];
    out.frac_above_2 = above2 / angular;
    out.frac_above_4 = above4 / angular;
    std::vector<std::pair<double, int>> ranked;
    for (int l = 1; l <= l_max; ++l)
      ranked.push_back({out.power[static_cast<std::size_t>(l)] / angular, l});
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    out.peaks[0] = {ranked[0].second, ranked[0].first};
    if (ranked.size() > 1) out.peaks[1] = {ranked[1].second, ranked[1].first};
  }
  return out;
}

}  // namespace shprobe::bandwidth

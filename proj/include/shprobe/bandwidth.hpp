#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shprobe/inject.hpp"
#include "shprobe/metrics.hpp"
#include "shprobe/sh.hpp"
#include "shprobe/xyz.hpp"

namespace shprobe::bandwidth {

// Gaussian shell weight g(r) = exp(-(r - mu)^2 / (2 sigma^2)) inside a
// cutoff ball.
struct ShellKernel {
  double r_cut = 5.0;   // A
  double mu = 2.5;      // A
  double sigma = 1.0;   // A
  int l_max = 10;
};

struct NeighborDensity {
  sh::SHVector coeffs;
  int neighbor_count = 0;
  bool empty = false;  // no neighbors inside the ball
};

// c_lm = sum_{j != center, r_j <= r_cut} g(r_j) Y_l^m(rhat_j), directions
// relative to the center atom.
NeighborDensity neighbor_density_coeffs(const inject::Positions& positions,
                                        int center, const ShellKernel& kernel);

struct BandwidthProfile {
  std::vector<double> w;  // per-degree variance fractions, sum to 1
  int lstar = 0;          // min l with cumulative fraction >= threshold
  bool undefined = false; // total power was zero
};

BandwidthProfile bandwidth_lstar(const sh::SHVector& coeffs,
                                 double threshold = 0.95);

// One group per molecule/chain; bootstrap resampling happens at this level.
struct BandwidthSummary {
  double median_lstar = 0.0;
  double p_le4 = 0.0;
  metrics::Ci p_le4_ci;
  std::vector<long> histogram;      // counts per lstar value 0..l_max
  std::size_t atom_count = 0;
  std::size_t skipped_empty = 0;    // atoms with no neighbors in the ball
};

using AtomFilter = std::function<bool(const std::string& symbol)>;

BandwidthSummary dataset_bandwidth(const std::vector<xyz::PointCloud>& groups,
                                   const ShellKernel& kernel, double threshold,
                                   int bootstrap_b, std::uint64_t seed,
                                   const AtomFilter& filter = nullptr);

struct EnergySpectrum {
  std::vector<double> power;      // per-degree power of the fitted expansion
  double frac_above_2 = 0.0;      // share of angular (l >= 1) power at l > 2
  double frac_above_4 = 0.0;
  std::array<std::pair<int, double>, 2> peaks{};  // top-2 degrees by share
  bool ridge_fallback = false;
};

struct FrameSpec {
  int i = 0, j = 1, k = 2, a = 3;
};

// Least-squares expansion of the per-frame (mean-centered) energies on the
// canonical-direction harmonic basis; power fractions are over the angular
// (l >= 1) part.
EnergySpectrum natural_energy_spectrum(
    const std::vector<inject::Configuration>& dataset, const FrameSpec& frame,
    int l_max);

}  // namespace shprobe::bandwidth

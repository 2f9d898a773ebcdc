#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "shprobe/bandwidth.hpp"
#include "shprobe/errors.hpp"
#include "shprobe/inject.hpp"
#include "shprobe/rng.hpp"

using namespace shprobe;
using inject::Positions;

namespace {

Eigen::Matrix3d rotation_about(double angle, const Eigen::Vector3d& axis) {
  return Eigen::Matrix3d(Eigen::AngleAxisd(angle, axis.normalized()));
}

}  // namespace

TEST_CASE("single neighbor at the shell radius on the pole") {
  Positions p(2, 3);
  p << 0, 0, 0, 0, 0, 2.5;
  const bandwidth::ShellKernel kernel;
  const auto density = bandwidth::neighbor_density_coeffs(p, 0, kernel);
  REQUIRE_FALSE(density.empty);
  CHECK(density.neighbor_count == 1);
  const auto profile = bandwidth::bandwidth_lstar(density.coeffs, 0.95);
  // Y_l^0(z) carries (2l+1)/(4pi); the per-degree fractions are (2l+1)/121.
  for (int l = 0; l <= 10; ++l)
    CHECK(std::abs(profile.w[static_cast<std::size_t>(l)] -
                   (2.0 * l + 1.0) / 121.0) <= 1e-10);
  CHECK(profile.lstar == 10);
}

TEST_CASE("antipodal pair cancels every odd degree") {
  Positions p(3, 3);
  p << 0, 0, 0, 0, 0, 2.0, 0, 0, -2.0;
  const bandwidth::ShellKernel kernel;
  const auto density = bandwidth::neighbor_density_coeffs(p, 0, kernel);
  const auto profile = bandwidth::bandwidth_lstar(density.coeffs, 0.95);
  for (int l = 1; l <= 10; l += 2)
    CHECK(profile.w[static_cast<std::size_t>(l)] <= 1e-12);
}

TEST_CASE("empty neighborhood is flagged") {
  Positions p(2, 3);
  p << 0, 0, 0, 0, 0, 8.0;  // beyond the 5 A ball
  const auto density =
      bandwidth::neighbor_density_coeffs(p, 0, bandwidth::ShellKernel{});
  CHECK(density.empty);
  CHECK(density.coeffs.band_power(0) == 0.0);
  const auto profile = bandwidth::bandwidth_lstar(density.coeffs, 0.95);
  CHECK(profile.undefined);
}

TEST_CASE("rotation invariance of the per-degree fractions") {
  const CounterRng rng(5);
  Positions p(7, 3);
  std::uint64_t draw = 0;
  for (int i = 0; i < 7; ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = 1.8 * rng.normal(draw++);
  const bandwidth::ShellKernel kernel;
  const auto base = bandwidth::bandwidth_lstar(
      bandwidth::neighbor_density_coeffs(p, 0, kernel).coeffs, 0.95);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Matrix3d q = rotation_about(
        0.3 + 0.42 * t, Eigen::Vector3d(rng.normal(100 + 3 * t),
                                        rng.normal(101 + 3 * t),
                                        rng.normal(102 + 3 * t)));
    // Rotate about the center atom.
    Positions moved = p;
    const Eigen::RowVector3d center = p.row(0);
    for (int i = 0; i < 7; ++i)
      moved.row(i) = center + (p.row(i) - center) * q.transpose();
    const auto rotated = bandwidth::bandwidth_lstar(
        bandwidth::neighbor_density_coeffs(moved, 0, kernel).coeffs, 0.95);
    for (std::size_t l = 0; l < base.w.size(); ++l)
      CHECK(std::abs(rotated.w[l] - base.w[l]) <= 1e-10);
    CHECK(rotated.lstar == base.lstar);
  }
}

TEST_CASE("kernel rescaling leaves fractions unchanged") {
  const CounterRng rng(9);
  Positions p(6, 3);
  std::uint64_t draw = 0;
  for (int i = 0; i < 6; ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = 1.5 * rng.normal(draw++);
  const bandwidth::ShellKernel kernel;
  const auto base = bandwidth::neighbor_density_coeffs(p, 0, kernel);
  // Doubling g uniformly doubles every coefficient.
  sh::SHVector doubled = base.coeffs;
  for (double& v : doubled.coeffs) v *= 2.0;
  const auto w1 = bandwidth::bandwidth_lstar(base.coeffs, 0.95);
  const auto w2 = bandwidth::bandwidth_lstar(doubled, 0.95);
  for (std::size_t l = 0; l < w1.w.size(); ++l)
    CHECK(w1.w[l] == doctest::Approx(w2.w[l]).epsilon(1e-14));
  CHECK(w1.lstar == w2.lstar);
}

TEST_CASE("lstar threshold semantics") {
  SUBCASE("pure l = 0 density") {
    sh::SHVector c(10);
    c.at(0, 0) = 3.0;
    const auto profile = bandwidth::bandwidth_lstar(c, 0.95);
    CHECK(profile.lstar == 0);
  }

  SUBCASE("uniform fractions reach 0.95 only at the last degree") {
    sh::SHVector c(10);
    for (int l = 0; l <= 10; ++l) c.at(l, 0) = 1.0;
    const auto profile = bandwidth::bandwidth_lstar(c, 0.95);
    CHECK(profile.lstar == 10);
  }

  SUBCASE("threshold one selects the top occupied degree") {
    sh::SHVector c(10);
    c.at(0, 0) = 1.0;
    c.at(7, -3) = 0.2;
    const auto profile = bandwidth::bandwidth_lstar(c, 1.0);
    CHECK(profile.lstar == 7);
  }

  SUBCASE("monotone in the threshold") {
    sh::SHVector c(10);
    const CounterRng rng(31);
    for (std::size_t j = 0; j < c.size(); ++j) c.coeffs[j] = rng.normal(j);
    int prev = 11;
    for (double th : {1.0, 0.95, 0.8, 0.6, 0.4, 0.2, 0.05}) {
      const auto profile = bandwidth::bandwidth_lstar(c, th);
      CHECK(profile.lstar <= prev);
      prev = profile.lstar;
    }
  }

  SUBCASE("invalid threshold") {
    sh::SHVector c(4);
    CHECK_THROWS_AS(bandwidth::bandwidth_lstar(c, 0.0), ArgumentError);
    CHECK_THROWS_AS(bandwidth::bandwidth_lstar(c, 1.5), ArgumentError);
  }
}

TEST_CASE("dataset summary pools per-atom values and filters") {
  // Two molecules of single-shell-neighbor pairs: every atom sees exactly one
  // neighbor at 2.5 A, so every lstar is 10.
  std::vector<xyz::PointCloud> groups;
  for (int g = 0; g < 3; ++g) {
    xyz::PointCloud pc;
    pc.symbols = {"C", "O"};
    pc.positions.resize(2, 3);
    pc.positions << 0, 0, 0, 0, 0, 2.5;
    groups.push_back(pc);
  }
  const bandwidth::ShellKernel kernel;
  const auto summary = bandwidth::dataset_bandwidth(groups, kernel, 0.95, 2000, 42);
  CHECK(summary.atom_count == 6);
  CHECK(summary.median_lstar == 10.0);
  CHECK(summary.p_le4 == 0.0);
  CHECK(summary.histogram[10] == 6);

  SUBCASE("heavy-atom filter is caller supplied") {
    auto with_h = groups;
    with_h[0].symbols = {"C", "H"};
    const auto filtered = bandwidth::dataset_bandwidth(
        with_h, kernel, 0.95, 0, 1,
        [](const std::string& s) { return s != "H"; });
    // Molecule 0 keeps only the carbon, which now has no neighbors.
    CHECK(filtered.atom_count == 4);
    CHECK(filtered.skipped_empty == 1);
  }

  SUBCASE("all low-bandwidth atoms give P(lstar <= 4) = 1") {
    std::vector<xyz::PointCloud> antipodal;
    xyz::PointCloud pc;
    pc.symbols = {"C", "N", "N"};
    pc.positions.resize(3, 3);
    pc.positions << 0, 0, 0, 0, 0, 2.5, 0, 0, -2.5;
    antipodal.push_back(pc);
    antipodal.push_back(pc);
    const auto s = bandwidth::dataset_bandwidth(antipodal, kernel, 0.6, 1000, 3);
    // The center atom sees the antipodal pair (even degrees only); at a low
    // threshold its lstar is small, and the end atoms see one neighbor each.
    CHECK(s.atom_count == 6);
    CHECK(s.p_le4_ci.lo <= s.p_le4);
    CHECK(s.p_le4_ci.hi >= s.p_le4);
  }

  SUBCASE("an all-lstar-0 dataset has P(lstar <= 4) = 1") {
    // With a threshold below w(0) = 1/121 every single-neighbor atom stops
    // at degree zero.
    const auto s = bandwidth::dataset_bandwidth(groups, kernel, 0.005, 1000, 5);
    CHECK(s.median_lstar == 0.0);
    CHECK(s.p_le4 == 1.0);
    CHECK(s.p_le4_ci.lo == 1.0);
    CHECK(s.p_le4_ci.hi == 1.0);
  }

  SUBCASE("median matches direct pooling") {
    std::vector<int> pooled;
    for (const auto& group : groups)
      for (int i = 0; i < 2; ++i) {
        const auto d = bandwidth::neighbor_density_coeffs(group.positions, i, kernel);
        pooled.push_back(bandwidth::bandwidth_lstar(d.coeffs, 0.95).lstar);
      }
    std::sort(pooled.begin(), pooled.end());
    CHECK(summary.median_lstar ==
          0.5 * (pooled[2] + pooled[3]));
  }
}

TEST_CASE("natural energy spectrum") {
  const CounterRng rng(77);
  // Random rigid-ish configurations with enough conformational spread.
  auto make_dataset = [&](int frames) {
    std::vector<inject::Configuration> out;
    std::uint64_t draw = 0;
    for (int f = 0; f < frames; ++f) {
      inject::Configuration cfg;
      cfg.positions.resize(6, 3);
      for (int i = 0; i < 6; ++i)
        for (int c = 0; c < 3; ++c)
          cfg.positions(i, c) = 2.0 * rng.normal(draw++);
      cfg.forces = inject::Forces::Zero(6, 3);
      out.push_back(cfg);
    }
    return out;
  };

  SUBCASE("pure degree-5 energy lands at l = 5") {
    auto dataset = make_dataset(160);
    const bandwidth::FrameSpec frame{0, 1, 2, 4};
    // Synthesize energies as a fixed degree-5 band of the canonical
    // direction.
    std::vector<double> c(11);
    for (std::size_t m = 0; m < c.size(); ++m) c[m] = rng.normal(9000 + m);
    for (auto& cfg : dataset) {
      const auto fr = inject::body_frame(cfg.positions, frame.i, frame.j, frame.k);
      const auto u = inject::canonical_direction(cfg.positions, fr, frame.a);
      cfg.energy = sh::eval_band_with_gradient(5, c, u).value;
    }
    const auto spectrum = bandwidth::natural_energy_spectrum(dataset, frame, 6);
    double total = 0.0;
    for (int l = 1; l <= 6; ++l) total += spectrum.power[static_cast<std::size_t>(l)];
    CHECK(spectrum.power[5] / total >= 0.99);
    CHECK(spectrum.peaks[0].first == 5);
    CHECK(spectrum.frac_above_4 >= 0.99);
  }

  SUBCASE("constant energies have no angular power") {
    auto dataset = make_dataset(80);
    for (auto& cfg : dataset) cfg.energy = -512.75;
    const auto spectrum = bandwidth::natural_energy_spectrum(dataset, {0, 1, 2, 4}, 4);
    CHECK(spectrum.frac_above_2 == 0.0);
    CHECK(spectrum.frac_above_4 == 0.0);
    for (int l = 0; l <= 4; ++l)
      CHECK(spectrum.power[static_cast<std::size_t>(l)] <= 1e-16);
  }

  SUBCASE("rank-deficient designs fall back to ridge with a flag") {
    auto dataset = make_dataset(10);  // far fewer frames than coefficients
    for (auto& cfg : dataset) cfg.energy = 1.0;
    const auto spectrum = bandwidth::natural_energy_spectrum(dataset, {0, 1, 2, 4}, 4);
    CHECK(spectrum.ridge_fallback);
  }
}

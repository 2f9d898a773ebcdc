#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shprobe/sh.hpp"

namespace shprobe::inject {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Forces = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// One molecular frame: positions in Angstrom, energy in kcal/mol, forces in
// kcal/mol/A.
struct Configuration {
  Positions positions;
  double energy = 0.0;
  Forces forces;
};

// Right-handed orthonormal body frame R = [e1 e2 e3] and the conditioning
// witness sigma_min(G), G = X^T X with X = [r_j - r_i, r_k - r_i] (A^2).
struct FrameResult {
  Eigen::Matrix3d R;
  double sigma_min = 0.0;
};

inline constexpr double kSigmaMinFloor = 1e-8;   // A^2
inline constexpr double kAnchorNormFloor = 1e-8; // A
inline constexpr double kLeakageGate = 0.018;
inline constexpr double kEtaHeuristicFloor = 0.20;

// e1 ~ r_i - r_j, e3 ~ e1 x (r_k - r_j), e2 = e3 x e1.
// Throws DegenerateFrameError when the triple is (near-)collinear.
FrameResult body_frame(const Positions& positions, int i, int j, int k);

// R^T (r_a - centroid) / |r_a - centroid|.  Invariant under rigid motion of
// all positions.  Throws DegenerateAnchorError when the anchor sits at the
// centroid.
sh::Direction canonical_direction(const Positions& positions,
                                  const FrameResult& frame, int a);

// Injection recipe: degree, amplitude, fixed coefficient vector (drawn once
// from the seed and shared across all configurations), frame triple, anchor.
struct InjectionSpec {
  int l_inj = 1;
  double alpha = 0.0;           // kcal/mol
  std::vector<double> c;        // length 2*l_inj + 1
  int i = 0, j = 1, k = 2;      // frame triple
  int a = 3;                    // anchor atom
  std::uint64_t coeff_seed = 0;

  static InjectionSpec make(int l_inj, double alpha, int i, int j, int k, int a,
                            std::uint64_t coeff_seed);
};

// alpha * sum_m c_m Y_{l_inj}^m(canonical direction).
double injected_energy(const Positions& positions, const InjectionSpec& spec);

// -d(injected energy)/d(positions), differentiated analytically through the
// centroid, the Gram-Schmidt frame, and the normalizations.
Forces injected_forces(const Positions& positions, const InjectionSpec& spec);

struct Rejection {
  std::size_t frame_index;
  std::string reason;
};

struct InjectionReport {
  std::vector<Rejection> rejections;
  std::vector<std::size_t> kept;  // indices of frames that passed the gates
};

// Per frame: energy += E_inj, forces += F_inj.  The input is untouched.
// Frames failing the frame/anchor gates are listed in the report; unless
// skip_degenerate is set, any rejection throws DegenerateFrameError.
std::vector<Configuration> inject_dataset(const std::vector<Configuration>& dataset,
                                          const InjectionSpec& spec,
                                          InjectionReport* report = nullptr,
                                          bool skip_degenerate = false);

// F_nat + k * (F_1x - F_nat), elementwise over frames.
std::vector<Forces> amplitude_calibrate(const std::vector<Forces>& f_nat,
                                        const std::vector<Forces>& f_1x,
                                        double k);

// eta = var(F_inj - F_nat) / (var(F_nat) + var(F_inj - F_nat)) over all force
// components of the dataset.
double variance_share(const std::vector<Configuration>& nat,
                      const std::vector<Configuration>& inj);

struct LeakageResult {
  double rho2_max = 0.0;
  // Pairs skipped because one series was constant (correlation undefined).
  std::vector<std::pair<int, int>> undefined_pairs;
  bool reject = false;  // rho2_max > kLeakageGate
};

// Maximum squared Pearson correlation between the per-coefficient series of
// every pair of splits.  Each split contributes one coefficient vector (all
// vectors the same length >= 2).
LeakageResult split_leakage(const std::vector<std::vector<double>>& split_coeffs);

// sqrt(<|F|^2>) per component over the dataset (the normalization scale used
// by normalized force errors).
double force_scale(const std::vector<Configuration>& dataset);

}  // namespace shprobe::inject

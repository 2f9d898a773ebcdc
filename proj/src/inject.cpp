#include "shprobe/inject.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <string>

#include "shprobe/errors.hpp"
#include "shprobe/rng.hpp"

namespace shprobe::inject {

namespace {

using Eigen::Vector3d;

void check_atom(const Positions& p, int idx, const char* who) {
  if (idx < 0 || idx >= p.rows())
    throw ArgumentError(std::string(who) + ": atom index " + std::to_string(idx) +
                        " out of range");
}

struct FrameIntermediates {
  Vector3d v1, w, c;     // r_i - r_j, r_k - r_j, e1 x w
  Vector3d e1, e2, e3;
  double n1 = 0.0, nc = 0.0;
};

FrameIntermediates frame_chain(const Positions& positions, int i, int j, int k) {
  FrameIntermediates f;
  f.v1 = (positions.row(i) - positions.row(j)).transpose();
  f.w = (positions.row(k) - positions.row(j)).transpose();
  f.n1 = f.v1.norm();
  if (f.n1 < 1e-300) throw DegenerateFrameError(0.0);
  f.e1 = f.v1 / f.n1;
  f.c = f.e1.cross(f.w);
  f.nc = f.c.norm();
  if (f.nc < 1e-300) throw DegenerateFrameError(0.0);
  f.e3 = f.c / f.nc;
  f.e2 = f.e3.cross(f.e1);
  return f;
}

double gram_sigma_min(const Positions& positions, int i, int j, int k) {
  Eigen::Matrix<double, 3, 2> x;
  x.col(0) = (positions.row(j) - positions.row(i)).transpose();
  x.col(1) = (positions.row(k) - positions.row(i)).transpose();
  const Eigen::Matrix2d g = x.transpose() * x;
  const double tr = g.trace();
  const double det = g.determinant();
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  return tr / 2.0 - disc;
}

}  // namespace

FrameResult body_frame(const Positions& positions, int i, int j, int k) {
  check_atom(positions, i, "body_frame");
  check_atom(positions, j, "body_frame");
  check_atom(positions, k, "body_frame");
  if (i == j || j == k || i == k)
    throw ArgumentError("body_frame: frame atoms must be distinct");
  const double sigma = gram_sigma_min(positions, i, j, k);
  if (sigma <= kSigmaMinFloor) throw DegenerateFrameError(sigma);
  const FrameIntermediates f = frame_chain(positions, i, j, k);
  FrameResult out;
  out.R.col(0) = f.e1;
  out.R.col(1) = f.e2;
  out.R.col(2) = f.e3;
  out.sigma_min = sigma;
  return out;
}

sh::Direction canonical_direction(const Positions& positions,
                                  const FrameResult& frame, int a) {
  check_atom(positions, a, "canonical_direction");
  const Vector3d centroid = positions.colwise().mean().transpose();
  const Vector3d delta = positions.row(a).transpose() - centroid;
  const double n = delta.norm();
  if (n <= kAnchorNormFloor) throw DegenerateAnchorError(n);
  const Vector3d u = frame.R.transpose() * (delta / n);
  return sh::Direction{u.x(), u.y(), u.z()};
}

InjectionSpec InjectionSpec::make(int l_inj, double alpha, int i, int j, int k,
                                  int a, std::uint64_t coeff_seed) {
  if (l_inj < 1 || l_inj > sh::kMaxDegree)
    throw ArgumentError("InjectionSpec: l_inj outside [1, max degree]");
  InjectionSpec spec;
  spec.l_inj = l_inj;
  spec.alpha = alpha;
  spec.i = i;
  spec.j = j;
  spec.k = k;
  spec.a = a;
  spec.coeff_seed = coeff_seed;
  const CounterRng rng(coeff_seed);
  spec.c.resize(static_cast<std::size_t>(2 * l_inj + 1));
  for (std::size_t m = 0; m < spec.c.size(); ++m) spec.c[m] = rng.normal(m);
  return spec;
}

double injected_energy(const Positions& positions, const InjectionSpec& spec) {
  const FrameResult frame = body_frame(positions, spec.i, spec.j, spec.k);
  const sh::Direction u = canonical_direction(positions, frame, spec.a);
  const sh::BandEval ev = sh::eval_band_with_gradient(spec.l_inj, spec.c, u);
  return spec.alpha * ev.value;
}

Forces injected_forces(const Positions& positions, const InjectionSpec& spec) {
  const int n_atoms = static_cast<int>(positions.rows());
  if (n_atoms < 4)
    throw ArgumentError("injected_forces: need at least 4 atoms");
  const double sigma = gram_sigma_min(positions, spec.i, spec.j, spec.k);
  if (sigma <= kSigmaMinFloor) throw DegenerateFrameError(sigma);
  const FrameIntermediates f = frame_chain(positions, spec.i, spec.j, spec.k);

  const Vector3d centroid = positions.colwise().mean().transpose();
  const Vector3d delta = positions.row(spec.a).transpose() - centroid;
  const double nd = delta.norm();
  if (nd <= kAnchorNormFloor) throw DegenerateAnchorError(nd);
  const Vector3d dhat = delta / nd;

  Eigen::Matrix3d R;
  R.col(0) = f.e1;
  R.col(1) = f.e2;
  R.col(2) = f.e3;
  const Vector3d u = R.transpose() * dhat;

  const sh::BandEval ev = sh::eval_band_with_gradient(
      spec.l_inj, spec.c, sh::Direction{u.x(), u.y(), u.z()});
  // dE/du, tangent at u; alpha applied at the end.
  const Vector3d gu(ev.grad[0], ev.grad[1], ev.grad[2]);

  // Reverse pass.  E depends on u = R^T dhat: accumulate adjoints of the
  // frame vectors and of dhat, then push through the Gram-Schmidt chain and
  // the centroid.
  const Vector3d dhat_bar_from_R = R * gu;  // sum_k gu_k e_k
  const Vector3d e1_bar_direct = gu.x() * dhat;
  const Vector3d e2_bar = gu.y() * dhat;
  const Vector3d e3_bar_direct = gu.z() * dhat;

  // e2 = e3 x e1
  const Vector3d e3_bar = e3_bar_direct + f.e1.cross(e2_bar);
  Vector3d e1_bar = e1_bar_direct + e2_bar.cross(f.e3);
  // e3 = c / |c|
  const Vector3d c_bar = (e3_bar - f.e3.dot(e3_bar) * f.e3) / f.nc;
  // c = e1 x w
  e1_bar += f.w.cross(c_bar);
  const Vector3d w_bar = c_bar.cross(f.e1);
  // e1 = v1 / |v1|
  const Vector3d v1_bar = (e1_bar - f.e1.dot(e1_bar) * f.e1) / f.n1;
  // dhat = delta / |delta|
  const Vector3d delta_bar =
      (dhat_bar_from_R - dhat.dot(dhat_bar_from_R) * dhat) / nd;

  Forces grad = Forces::Zero(n_atoms, 3);
  grad.row(spec.i) += v1_bar.transpose();
  grad.row(spec.j) -= v1_bar.transpose();
  grad.row(spec.k) += w_bar.transpose();
  grad.row(spec.j) -= w_bar.transpose();
  grad.row(spec.a) += delta_bar.transpose();
  grad.rowwise() -= (delta_bar / n_atoms).transpose();

  return -spec.alpha * grad;
}

std::vector<Configuration> inject_dataset(const std::vector<Configuration>& dataset,
                                          const InjectionSpec& spec,
                                          InjectionReport* report,
                                          bool skip_degenerate) {
  std::vector<Configuration> out;
  out.reserve(dataset.size());
  InjectionReport local;
  for (std::size_t idx = 0; idx < dataset.size(); ++idx) {
    const Configuration& cfg = dataset[idx];
    try {
      Configuration injected = cfg;
      injected.energy += injected_energy(cfg.positions, spec);
      injected.forces += injected_forces(cfg.positions, spec);
      local.kept.push_back(idx);
      out.push_back(std::move(injected));
    } catch (const DegenerateFrameError& e) {
      local.rejections.push_back({idx, e.what()});
      if (!skip_degenerate) {
        if (report) *report = local;
        throw;
      }
    } catch (const DegenerateAnchorError& e) {
      local.rejections.push_back({idx, e.what()});
      if (!skip_degenerate) {
        if (report) *report = local;
        throw;
      }
    }
  }
  if (report) *report = local;
  return out;
}

std::vector<Forces> amplitude_calibrate(const std::vector<Forces>& f_nat,
                                        const std::vector<Forces>& f_1x,
                                        double k) {
  if (f_nat.size() != f_1x.size())
    throw ArgumentError("amplitude_calibrate: frame count mismatch");
  std::vector<Forces> out;
  out.reserve(f_nat.size());
  for (std::size_t i = 0; i < f_nat.size(); ++i) {
    if (f_nat[i].rows() != f_1x[i].rows())
      throw ArgumentError("amplitude_calibrate: shape mismatch at frame " +
                          std::to_string(i));
    out.push_back(f_nat[i] + k * (f_1x[i] - f_nat[i]));
  }
  return out;
}

namespace {

// Running mean/variance over force components.
struct Accumulator {
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  double variance() const {
    if (n == 0) return 0.0;
    const double mean = sum / n;
    return sum2 / n - mean * mean;
  }
};

}  // namespace

double variance_share(const std::vector<Configuration>& nat,
                      const std::vector<Configuration>& inj) {
  if (nat.empty() || nat.size() != inj.size())
    throw ArgumentError("variance_share: empty dataset or frame count mismatch");
  Accumulator a_nat, a_del;
  for (std::size_t f = 0; f < nat.size(); ++f) {
    if (nat[f].forces.rows() != inj[f].forces.rows())
      throw ArgumentError("variance_share: shape mismatch at frame " +
                          std::to_string(f));
    for (Eigen::Index r = 0; r < nat[f].forces.rows(); ++r)
      for (int c = 0; c < 3; ++c) {
        a_nat.add(nat[f].forces(r, c));
        a_del.add(inj[f].forces(r, c) - nat[f].forces(r, c));
      }
  }
  const double v_nat = a_nat.variance();
  const double v_del = a_del.variance();
  if (v_nat + v_del == 0.0) return 0.0;
  return v_del / (v_nat + v_del);
}

LeakageResult split_leakage(const std::vector<std::vector<double>>& split_coeffs) {
  if (split_coeffs.size() < 2)
    throw ArgumentError("split_leakage: need at least two splits");
  const std::size_t n = split_coeffs[0].size();
  if (n < 2) throw ArgumentError("split_leakage: need >= 2 samples per split");
  for (const auto& s : split_coeffs)
    if (s.size() != n)
      throw ArgumentError("split_leakage: coefficient series length mismatch");

  LeakageResult out;
  for (std::size_t a = 0; a < split_coeffs.size(); ++a)
    for (std::size_t b = a + 1; b < split_coeffs.size(); ++b) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ma += split_coeffs[a][i];
        mb += split_coeffs[b][i];
      }
      ma /= n;
      mb /= n;
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double da = split_coeffs[a][i] - ma;
        const double db = split_coeffs[b][i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
      }
      if (saa <= 0.0 || sbb <= 0.0) {
        out.undefined_pairs.push_back({static_cast<int>(a), static_cast<int>(b)});
        continue;
      }
      const double rho2 = (sab * sab) / (saa * sbb);
      out.rho2_max = std::max(out.rho2_max, rho2);
    }
  out.reject = out.rho2_max > kLeakageGate;
  return out;
}

double force_scale(const std::vector<Configuration>& dataset) {
  if (dataset.empty()) throw ArgumentError("force_scale: empty dataset");
  double sum2 = 0.0;
  std::size_t n = 0;
  for (const auto& cfg : dataset) {
    sum2 += cfg.forces.array().square().sum();
    n += static_cast<std::size_t>(cfg.forces.size());
  }
  return std::sqrt(sum2 / static_cast<double>(n));
}

}  // namespace shprobe::inject

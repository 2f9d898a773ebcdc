// shprobe: angular-frequency reach diagnostics for equivariant readouts.
//
// Subcommands: inject, grid, hardceil, spn-train, diagnose, bandwidth,
// spectrum.  Every command is a pure function of its input files, resolved
// configuration, and seeds; reruns produce byte-identical outputs.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "shprobe/bandwidth.hpp"
#include "shprobe/errors.hpp"
#include "shprobe/gaunt.hpp"
#include "shprobe/inject.hpp"
#include "shprobe/metrics.hpp"
#include "shprobe/probe.hpp"
#include "shprobe/rng.hpp"
#include "shprobe/sh.hpp"
#include "shprobe/spn.hpp"
#include "shprobe/xyz.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace shprobe;

namespace {

// Exit codes shared across subcommands (also documented in --help).
enum ExitCode {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kDegenerate = 3,
  kGateLeakage = 4,
  kResource = 5,
  kEmpty = 6,
  kTraining = 7,
  kIo = 8,
};

struct Common {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 1;
  bool print_json = false;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Master RNG seed")
      ->capture_default_str();
  cmd->add_option("--out-dir", common.out_dir, "Directory for output files")
      ->capture_default_str();
  cmd->add_option("--threads", common.threads, "Worker cap for parallel parts")
      ->capture_default_str();
  cmd->add_flag("--json", common.print_json, "Print the report JSON to stdout");
}

// Primary outputs are written to <path>.partial first and renamed on
// success, so an interrupted run never leaves an unmarked partial file.
void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp);
    if (!out) throw ArgumentError("cannot write " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

void write_json_file(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

std::string out_path(const Common& common, const std::string& name) {
  fs::create_directories(common.out_dir);
  return (fs::path(common.out_dir) / name).string();
}

void emit(const Common& common, const std::string& name, const json& report,
          const std::string& text) {
  write_json_file(out_path(common, name), report);
  if (common.print_json)
    std::cout << report.dump(2) << "\n";
  else if (!text.empty())
    std::cout << text;
}

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// inject

struct InjectArgs {
  Common common;
  std::string input;
  std::string output = "injected.xyz";
  int l_inj = 4;
  double alpha = 0.05;
  std::vector<int> frame = {0, 1, 2};
  int anchor = 3;
  std::uint64_t coeff_seed = 12;
  std::uint64_t split_seed = 13;
  std::vector<double> split_fracs = {0.6, 0.2, 0.2};
  int leak_lmax = -1;  // default: l_inj
  bool skip_degenerate = false;
  bool force = false;
};

// Per-split ridge regressors of the centered natural energies on the
// canonical-direction harmonic basis; the shared injected term would
// correlate identically across splits, so the screen runs on the natural
// energies the splits actually partition.
std::vector<std::vector<double>> split_energy_regressors(
    const std::vector<xyz::Frame>& frames, const inject::InjectionSpec& spec,
    int basis_l, const std::vector<std::vector<std::size_t>>& splits) {
  const int p = (basis_l + 1) * (basis_l + 1);
  std::vector<std::vector<double>> out;
  std::vector<double> basis(static_cast<std::size_t>(p));
  for (const auto& members : splits) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(members.size()), p);
    Eigen::VectorXd y(static_cast<Eigen::Index>(members.size()));
    for (std::size_t r = 0; r < members.size(); ++r) {
      const auto& cfg = frames[members[r]].config;
      const auto fr = inject::body_frame(cfg.positions, spec.i, spec.j, spec.k);
      const auto u = inject::canonical_direction(cfg.positions, fr, spec.a);
      sh::eval_basis(basis_l, u, basis.data());
      for (int c = 0; c < p; ++c) x(static_cast<Eigen::Index>(r), c) = basis[c];
      y[static_cast<Eigen::Index>(r)] = cfg.energy;
    }
    y.array() -= y.mean();
    const Eigen::MatrixXd gram =
        x.transpose() * x + 1e-8 * Eigen::MatrixXd::Identity(p, p);
    const Eigen::VectorXd beta = gram.ldlt().solve(x.transpose() * y);
    out.emplace_back(beta.data(), beta.data() + beta.size());
  }
  return out;
}

int run_inject(const InjectArgs& args) {
  const auto frames = xyz::read_trajectory(args.input);
  const auto spec = inject::InjectionSpec::make(args.l_inj, args.alpha,
                                                args.frame[0], args.frame[1],
                                                args.frame[2], args.anchor,
                                                args.coeff_seed);

  json report;
  report["resolved_config"] = {
      {"command", "inject"},
      {"input", args.input},
      {"output", args.output},
      {"l_inj", args.l_inj},
      {"alpha", args.alpha},
      {"frame", args.frame},
      {"anchor", args.anchor},
      {"coeff_seed", args.coeff_seed},
      {"split_seed", args.split_seed},
      {"split_fracs", args.split_fracs},
      {"leak_lmax", args.leak_lmax < 0 ? args.l_inj : args.leak_lmax},
      {"skip_degenerate", args.skip_degenerate},
      {"force", args.force},
      {"seed", args.common.seed},
  };
  report["coefficients"] = spec.c;

  std::vector<inject::Configuration> nat;
  nat.reserve(frames.size());
  for (const auto& f : frames) nat.push_back(f.config);

  inject::InjectionReport inj_report;
  std::vector<inject::Configuration> injected;
  try {
    injected = inject::inject_dataset(nat, spec, &inj_report, args.skip_degenerate);
  } catch (const std::runtime_error& e) {
    json rejections = json::array();
    for (const auto& r : inj_report.rejections)
      rejections.push_back({{"frame", r.frame_index}, {"reason", r.reason}});
    report["rejections"] = rejections;
    report["error"] = e.what();
    write_json_file(out_path(args.common, "inject_report.json"), report);
    std::cerr << "inject: degenerate frame without --skip-degenerate: "
              << e.what() << "\n";
    return kDegenerate;
  }

  json rejections = json::array();
  for (const auto& r : inj_report.rejections)
    rejections.push_back({{"frame", r.frame_index}, {"reason", r.reason}});
  report["rejections"] = rejections;
  if (injected.empty()) {
    report["error"] = "every frame was rejected by the frame/anchor gates";
    write_json_file(out_path(args.common, "inject_report.json"), report);
    std::cerr << "inject: no frames left after the degeneracy gates\n";
    return kDegenerate;
  }

  // Natural-signal scale and injected variance share.
  std::vector<inject::Configuration> nat_kept;
  for (std::size_t idx : inj_report.kept) nat_kept.push_back(nat[idx]);
  const double sigma_f = inject::force_scale(nat_kept);
  const double eta = inject::variance_share(nat_kept, injected);
  report["sigma_f"] = sigma_f;
  report["eta"] = eta;
  json warnings = json::array();
  if (eta < inject::kEtaHeuristicFloor && args.alpha != 0.0)
    warnings.push_back(
        "variance share eta = " + fmt(eta) +
        " is below the 0.20 detectability heuristic; consider re-amplifying");

  // Split-leakage screen over the kept frames.
  std::vector<xyz::Frame> kept_frames;
  for (std::size_t idx : inj_report.kept) kept_frames.push_back(frames[idx]);
  double rho2_max = 0.0;
  if (kept_frames.size() >= 6) {
    std::vector<std::size_t> order(kept_frames.size());
    std::iota(order.begin(), order.end(), 0);
    const CounterRng rng(args.split_seed);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.below(i, i)]);
    std::vector<std::vector<std::size_t>> splits(3);
    const std::size_t n1 =
        static_cast<std::size_t>(args.split_fracs[0] * order.size());
    const std::size_t n2 =
        n1 + static_cast<std::size_t>(args.split_fracs[1] * order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      splits[i < n1 ? 0 : (i < n2 ? 1 : 2)].push_back(order[i]);
    const int basis_l = args.leak_lmax < 0 ? args.l_inj : args.leak_lmax;
    const auto regressors =
        split_energy_regressors(kept_frames, spec, basis_l, splits);
    const auto leak = inject::split_leakage(regressors);
    rho2_max = leak.rho2_max;
    report["leakage"] = {{"rho2_max", rho2_max},
                         {"gate", inject::kLeakageGate},
                         {"reject", leak.reject},
                         {"splits", {splits[0].size(), splits[1].size(),
                                     splits[2].size()}}};
    if (leak.reject && !args.force) {
      report["warnings"] = warnings;
      write_json_file(out_path(args.common, "inject_report.json"), report);
      std::cerr << "inject: split leakage rho2_max = " << fmt(rho2_max)
                << " exceeds the " << inject::kLeakageGate
                << " gate (use --force to override)\n";
      return kGateLeakage;
    }
  } else {
    report["leakage"] = {{"rho2_max", nullptr},
                         {"note", "fewer than 6 frames; screen skipped"}};
  }
  report["warnings"] = warnings;

  std::vector<xyz::Frame> out_frames = kept_frames;
  for (std::size_t i = 0; i < out_frames.size(); ++i)
    out_frames[i].config = injected[i];
  const std::string out_file = out_path(args.common, args.output);
  {
    const std::string tmp = out_file + ".partial";
    xyz::write_trajectory(tmp, out_frames);
    fs::rename(tmp, out_file);
  }
  report["frames_written"] = out_frames.size();

  std::string text = "wrote " + out_file + " (" +
                     std::to_string(out_frames.size()) + " frames), eta = " +
                     fmt(eta) + ", sigma_F = " + fmt(sigma_f) +
                     ", rho2_max = " + fmt(rho2_max) + "\n";
  emit(args.common, "inject_report.json", report, text);
  return kOk;
}

// ---------------------------------------------------------------------------
// grid

struct GridArgs {
  Common common;
  std::vector<std::string> cells;  // "L,d" entries; empty = default eight
  int n = 4000;
  int lmax_extra = 3;
};

int run_grid(const GridArgs& args) {
  std::vector<std::pair<int, int>> cells;
  if (args.cells.empty()) {
    cells = probe::default_grid_cells();
  } else {
    for (const auto& spec : args.cells) {
      const auto comma = spec.find(',');
      if (comma == std::string::npos)
        throw ArgumentError("grid: cell must be L,d: " + spec);
      try {
        cells.push_back({std::stoi(spec.substr(0, comma)),
                         std::stoi(spec.substr(comma + 1))});
      } catch (const std::exception&) {
        throw ArgumentError("grid: cell must be L,d: " + spec);
      }
    }
  }
  const auto rows = probe::saturation_grid(cells, args.lmax_extra, args.n,
                                           args.common.seed, args.common.threads);

  json report;
  report["resolved_config"] = {{"command", "grid"},
                               {"n", args.n},
                               {"lmax_extra", args.lmax_extra},
                               {"seed", args.common.seed},
                               {"threads", args.common.threads}};
  json cell_rows = json::array();
  std::string table =
      "  L   d  dL   R2(dL)     R2(dL+1)   dR2\n"
      "---------------------------------------------\n";
  for (const auto& row : rows) {
    json cells_json = json::array();
    for (const auto& cell : row.cells)
      cells_json.push_back({{"l", cell.l},
                            {"r2", cell.result.r_squared},
                            {"mse", cell.result.mse},
                            {"degenerate_variance",
                             cell.result.degenerate_variance}});
    cell_rows.push_back({{"L", row.L},
                         {"d", row.d},
                         {"dL", row.L * row.d},
                         {"r2_at_ceiling", row.r2_at_ceiling},
                         {"r2_above_ceiling", row.r2_above_ceiling},
                         {"delta_r2", row.delta_r2},
                         {"sweep", cells_json}});
    char line[160];
    std::snprintf(line, sizeof(line), "%3d %3d %3d   %-10.4f %-10.4f %-10.4f\n",
                  row.L, row.d, row.L * row.d, row.r2_at_ceiling,
                  row.r2_above_ceiling, row.delta_r2);
    table += line;
  }
  report["rows"] = cell_rows;
  const std::string table_path = out_path(args.common, "grid_table.txt");
  write_text_atomic(table_path, table);
  emit(args.common, "grid.json", report, table);
  return kOk;
}

// ---------------------------------------------------------------------------
// hardceil

struct HardCeilArgs {
  Common common;
  int L = 3;
  int band = -1;  // default L
  int n = 4000;
};

int run_hardceil(const HardCeilArgs& args) {
  const int band = args.band < 0 ? args.L : args.band;
  const auto hc = probe::hard_ceiling_check(args.L, band, args.common.seed, args.n);
  json report;
  report["resolved_config"] = {{"command", "hardceil"},
                               {"L", args.L},
                               {"band", band},
                               {"n", args.n},
                               {"seed", args.common.seed}};
  report["mse_within"] = hc.mse_within;
  report["mse_above"] = hc.mse_above;
  report["var_above"] = hc.var_above;
  report["mse_above_over_var"] = hc.mse_above / hc.var_above;
  const std::string text =
      "linear probe at L = " + std::to_string(args.L) + ": mse(within) = " +
      fmt(hc.mse_within, 3) + ", mse(l = L+1) = " + fmt(hc.mse_above, 4) +
      " vs var " + fmt(hc.var_above, 4) + "\n";
  emit(args.common, "hardceil.json", report, text);
  return kOk;
}

// ---------------------------------------------------------------------------
// spn-train

struct SpnTrainArgs {
  Common common;
  int d_r = 2;
  std::string activation = "silu";
  int channels = 2;
  int l_max_feat = 2;
  int l_out = 2;
  int samples = 160;
  int epochs = 800;
  double lr = 3e-3;
  std::string optimizer = "adam";
  std::vector<int> theta_hidden = {24, 24};
  std::vector<int> phi_hidden = {12};
};

int run_spn_train(const SpnTrainArgs& args) {
  const cg::GauntTable table(std::max(2, args.l_max_feat));
  const auto act = spn::activation_from_tag(args.activation);

  // Synthetic invariant-predictable benchmark: the target is the squared
  // projection of the invariants on a fixed seeded vector.
  std::vector<spn::Features> batch;
  for (int i = 0; i < args.samples; ++i)
    batch.push_back(spn::Features::random(
        args.l_max_feat, args.channels,
        CounterRng(args.common.seed).bits(1000 + static_cast<std::uint64_t>(i))));
  const int n_inv = spn::invariant_count(args.d_r, args.l_max_feat, args.channels);
  const CounterRng rng(args.common.seed);
  Eigen::VectorXd v(n_inv);
  for (int i = 0; i < n_inv; ++i)
    v[i] = rng.normal(500 + static_cast<std::uint64_t>(i));
  std::vector<double> targets;
  for (const auto& f : batch) {
    const double t = v.dot(spn::extract_invariants(f, args.d_r, table));
    targets.push_back(t * t);
  }

  auto params = spn::init_params(args.d_r, args.l_max_feat, args.channels,
                                 args.l_out, act, args.common.seed + 1,
                                 args.theta_hidden, args.phi_hidden);
  const auto grad_check =
      spn::spn_gradient_check(batch, targets, params, table, 10,
                              args.common.seed + 2);

  spn::TrainOptions opts;
  opts.epochs = args.epochs;
  opts.lr = args.lr;
  opts.optimizer = args.optimizer == "gd" ? spn::Optimizer::GradientDescent
                                          : spn::Optimizer::Adam;
  const auto result = spn::spn_train(batch, targets, params, table, opts);

  double val_var = 0.0;
  {
    std::vector<double> y_val;
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (i % 2 == 1) y_val.push_back(targets[i]);
    double mean = 0.0;
    for (double y : y_val) mean += y;
    mean /= static_cast<double>(y_val.size());
    for (double y : y_val) val_var += (y - mean) * (y - mean);
    val_var /= static_cast<double>(y_val.size());
  }

  json report;
  report["resolved_config"] = {
      {"command", "spn-train"},     {"d_r", args.d_r},
      {"activation", args.activation}, {"channels", args.channels},
      {"l_max_feat", args.l_max_feat}, {"l_out", args.l_out},
      {"samples", args.samples},    {"epochs", args.epochs},
      {"lr", args.lr},              {"optimizer", args.optimizer},
      {"theta_hidden", args.theta_hidden}, {"phi_hidden", args.phi_hidden},
      {"seed", args.common.seed}};
  report["parameter_count"] = params.parameter_count();
  report["gradient_check_max_rel_error"] = grad_check.max_rel_error;
  report["best_val_mse"] = result.best_val_mse;
  report["best_epoch"] = result.best_epoch;
  report["val_r2"] = val_var > 0.0 ? 1.0 - result.best_val_mse / val_var : 0.0;
  report["final_train_loss"] =
      result.train_loss.empty() ? 0.0 : result.train_loss.back();
  const std::string text =
      "spn-train: " + std::to_string(params.parameter_count()) +
      " params, grad check " + fmt(grad_check.max_rel_error, 3) +
      ", best val MSE " + fmt(result.best_val_mse, 6) + " (epoch " +
      std::to_string(result.best_epoch) + "), val R2 " +
      fmt(report["val_r2"].get<double>(), 4) + "\n";
  emit(args.common, "spn_train.json", report, text);
  return kOk;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  Common common;
  std::string input;
  int d_r = 2;
  int L = 2;
  double contrast = 3.0;
  int B = 10000;
};

struct DiagnoseRow {
  int l = 0;
  std::vector<double> y_low, y_arch, y_high;
  std::optional<double> rho_mean;
  std::optional<metrics::Ci> rho_ci;
  double delta = 0.0;
  bool undefined = false;
};

std::vector<double> as_series(const nlohmann::json& v) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const auto& x : v) out.push_back(x.get<double>());
  } else {
    throw ArgumentError("diagnose: y values must be numbers or arrays");
  }
  if (out.empty()) throw ArgumentError("diagnose: empty y series");
  return out;
}

int run_diagnose(const DiagnoseArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw ArgumentError("diagnose: cannot open " + args.input);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ArgumentError(std::string("diagnose: bad JSON: ") + e.what());
  }

  std::vector<DiagnoseRow> rows;
  for (const auto& row : doc.at("rows")) {
    DiagnoseRow r;
    r.l = row.at("l").get<int>();
    r.y_low = as_series(row.at("y_low"));
    r.y_arch = as_series(row.at("y_arch"));
    r.y_high = as_series(row.at("y_high"));
    const std::size_t n_seeds =
        std::max({r.y_low.size(), r.y_arch.size(), r.y_high.size()});
    auto at = [&](const std::vector<double>& v, std::size_t i) {
      return v.size() == 1 ? v[0] : v.at(i);
    };
    std::vector<double> rhos, deltas;
    bool any_undefined = false;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const auto rec = metrics::recovery_fraction(
          at(r.y_low, s), at(r.y_arch, s), at(r.y_high, s));
      deltas.push_back(rec.delta);
      if (rec.rho)
        rhos.push_back(*rec.rho);
      else
        any_undefined = true;
    }
    r.delta = std::accumulate(deltas.begin(), deltas.end(), 0.0) /
              static_cast<double>(deltas.size());
    if (any_undefined || rhos.empty()) {
      r.undefined = true;
    } else {
      r.rho_mean = std::accumulate(rhos.begin(), rhos.end(), 0.0) /
                   static_cast<double>(rhos.size());
      if (rhos.size() >= 2) {
        const auto ci = metrics::bootstrap_mean_ci(rhos, args.B, 42);
        r.rho_ci = metrics::Ci{ci.lo, ci.hi};
      }
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ArgumentError("diagnose: no rows");
  std::sort(rows.begin(), rows.end(),
            [](const DiagnoseRow& a, const DiagnoseRow& b) { return a.l < b.l; });

  // Cliff: the highest degree whose recovery exceeds `contrast` times the
  // next degree's.
  std::optional<std::size_t> cliff_idx;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i + 1].l != rows[i].l + 1) continue;
    if (rows[i].undefined || rows[i + 1].undefined) continue;
    const double here = *rows[i].rho_mean;
    const double next = *rows[i + 1].rho_mean;
    if (here > 0.0 && (next <= 0.0 || here / next >= args.contrast))
      cliff_idx = i;
  }

  json report;
  report["resolved_config"] = {{"command", "diagnose"}, {"input", args.input},
                               {"d_r", args.d_r},       {"L", args.L},
                               {"contrast", args.contrast},
                               {"B", args.B},           {"seed", args.common.seed}};
  json out_rows = json::array();
  std::string table =
      "   l   y_low    y_arch   y_high   rho [95% CI]\n"
      "------------------------------------------------------\n";
  auto mean_of = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) /
           static_cast<double>(v.size());
  };
  for (const auto& r : rows) {
    metrics::MetricReport m;
    m.delta = r.delta;
    m.n_seeds = static_cast<int>(
        std::max({r.y_low.size(), r.y_arch.size(), r.y_high.size()}));
    if (r.undefined) {
      m.undefined_reason = "non-positive denominator";
    } else {
      m.rho = r.rho_mean;
      if (r.rho_ci) {
        m.ci_low = r.rho_ci->lo;
        m.ci_high = r.rho_ci->hi;
      }
    }
    json jr = nlohmann::json::parse(metrics::to_json(m));
    jr["l"] = r.l;
    out_rows.push_back(jr);

    char line[200];
    if (r.undefined)
      std::snprintf(line, sizeof(line),
                    "%4d   %-8.4g %-8.4g %-8.4g undefined (delta = %.4g)\n",
                    r.l, mean_of(r.y_low), mean_of(r.y_arch), mean_of(r.y_high),
                    r.delta);
    else if (r.rho_ci)
      std::snprintf(line, sizeof(line),
                    "%4d   %-8.4g %-8.4g %-8.4g %.3f [%.3f, %.3f]\n", r.l,
                    mean_of(r.y_low), mean_of(r.y_arch), mean_of(r.y_high),
                    *r.rho_mean, r.rho_ci->lo, r.rho_ci->hi);
    else
      std::snprintf(line, sizeof(line), "%4d   %-8.4g %-8.4g %-8.4g %.3f\n",
                    r.l, mean_of(r.y_low), mean_of(r.y_arch), mean_of(r.y_high),
                    *r.rho_mean);
    table += line;
  }
  report["rows"] = out_rows;

  std::string guidance;
  const int ceiling = args.d_r * args.L;
  if (cliff_idx) {
    const auto& at = rows[*cliff_idx];
    const auto& above = rows[*cliff_idx + 1];
    metrics::SharpnessResult xi;
    if (at.rho_ci && above.rho_ci)
      xi = metrics::sharpness(*at.rho_mean, *at.rho_ci, *above.rho_mean,
                              *above.rho_ci);
    else
      xi = metrics::sharpness(*at.rho_mean, *above.rho_mean);
    json cliff = {{"l_star", at.l},
                  {"rho_at", *at.rho_mean},
                  {"rho_above", *above.rho_mean},
                  {"matches_ceiling", at.l == ceiling},
                  {"ceiling", ceiling}};
    if (xi.value) {
      cliff["xi"] = *xi.value;
      cliff["xi_kind"] = xi.kind == metrics::SharpnessResult::Kind::LowerBound
                             ? "lower_bound"
                             : "exact";
    } else {
      cliff["xi"] = nullptr;
    }
    report["cliff"] = cliff;
    guidance = "cliff at l* = " + std::to_string(at.l);
    if (xi.value) guidance += ", sharpness = " + fmt(*xi.value, 4);
    guidance += ".\n";
    if (at.l == ceiling) {
      guidance += "l* matches the readout ceiling d_r * L = " +
                  std::to_string(ceiling) +
                  ". To reach higher degrees, raise the feature degree L "
                  "(ceiling moves by d_r per unit) or the readout degree d_r "
                  "(ceiling moves by L per unit); width and depth do not move "
                  "the ceiling.\n";
    } else {
      guidance += "l* differs from the nominal ceiling d_r * L = " +
                  std::to_string(ceiling) +
                  "; check the injection variance share and backbone quality "
                  "before changing the architecture.\n";
    }
  } else {
    report["cliff"] = nullptr;
    guidance =
        "no cliff detected within the probed degrees; no architectural "
        "change indicated by this sweep.\n";
  }
  report["guidance"] = guidance;

  bool all_undefined = true;
  for (const auto& r : rows) all_undefined = all_undefined && r.undefined;
  if (all_undefined)
    guidance += "warning: every row had a non-positive anchor gap; only raw "
                "gains (delta) are reported.\n";

  emit(args.common, "diagnose.json", report, table + guidance);
  return kOk;
}

// ---------------------------------------------------------------------------
// bandwidth

struct BandwidthArgs {
  Common common;
  std::string input;
  double r_cut = 5.0;
  double shell_mu = 2.5;
  double shell_sigma = 1.0;
  int l_max = 10;
  double threshold = 0.95;
  int B = 10000;
  bool include_h = false;
  std::string per_atom_csv;  // optional per-atom profile dump
};

int run_bandwidth(const BandwidthArgs& args) {
  std::vector<xyz::PointCloud> groups;
  try {
    // Extended-XYZ trajectories double as point-cloud groups per frame.
    const auto frames = xyz::read_trajectory(args.input);
    for (const auto& f : frames)
      groups.push_back(xyz::PointCloud{f.symbols, f.config.positions});
  } catch (const ArgumentError&) {
    groups = xyz::read_point_clouds(args.input);
  }
  if (groups.empty()) return kEmpty;

  bandwidth::ShellKernel kernel;
  kernel.r_cut = args.r_cut;
  kernel.mu = args.shell_mu;
  kernel.sigma = args.shell_sigma;
  kernel.l_max = args.l_max;
  const bandwidth::AtomFilter filter =
      args.include_h ? bandwidth::AtomFilter(nullptr)
                     : bandwidth::AtomFilter([](const std::string& s) {
                         return s != "H" && s != "h" && s != "1";
                       });
  const auto summary = bandwidth::dataset_bandwidth(
      groups, kernel, args.threshold, args.B, args.common.seed, filter);

  if (!args.per_atom_csv.empty()) {
    std::string csv = "group,atom,symbol,neighbors,lstar";
    for (int l = 0; l <= kernel.l_max; ++l)
      csv += ",w" + std::to_string(l);
    csv += "\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& group = groups[g];
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < group.positions.rows(); ++i)
        if (!filter || filter(group.symbols[static_cast<std::size_t>(i)]))
          keep.push_back(i);
      inject::Positions filtered(static_cast<Eigen::Index>(keep.size()), 3);
      for (std::size_t i = 0; i < keep.size(); ++i)
        filtered.row(static_cast<Eigen::Index>(i)) = group.positions.row(keep[i]);
      for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto density = bandwidth::neighbor_density_coeffs(
            filtered, static_cast<int>(i), kernel);
        const auto profile =
            bandwidth::bandwidth_lstar(density.coeffs, args.threshold);
        csv += std::to_string(g) + "," + std::to_string(keep[i]) + "," +
               group.symbols[static_cast<std::size_t>(keep[i])] + "," +
               std::to_string(density.neighbor_count) + "," +
               (profile.undefined ? "NA" : std::to_string(profile.lstar));
        for (double w : profile.w) csv += "," + fmt(w, 8);
        csv += "\n";
      }
    }
    write_text_atomic(out_path(args.common, args.per_atom_csv), csv);
  }

  json report;
  report["resolved_config"] = {
      {"command", "bandwidth"},   {"input", args.input},
      {"r_cut", args.r_cut},      {"shell_mu", args.shell_mu},
      {"shell_sigma", args.shell_sigma}, {"l_max", args.l_max},
      {"threshold", args.threshold},     {"B", args.B},
      {"include_h", args.include_h},     {"seed", args.common.seed}};
  report["groups"] = groups.size();
  report["atoms"] = summary.atom_count;
  report["skipped_empty"] = summary.skipped_empty;
  report["median_lstar"] = summary.median_lstar;
  report["p_lstar_le_4"] = summary.p_le4;
  report["p_lstar_le_4_ci"] = {summary.p_le4_ci.lo, summary.p_le4_ci.hi};
  report["histogram"] = summary.histogram;

  std::string text = "bandwidth over " + std::to_string(summary.atom_count) +
                     " atoms in " + std::to_string(groups.size()) +
                     " groups: median l* = " + fmt(summary.median_lstar, 3) +
                     ", P(l* <= 4) = " + fmt(summary.p_le4, 4) + " [" +
                     fmt(summary.p_le4_ci.lo, 4) + ", " +
                     fmt(summary.p_le4_ci.hi, 4) + "]\n";
  emit(args.common, "bandwidth.json", report, text);
  return kOk;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumArgs {
  Common common;
  std::string input;
  std::vector<int> frame = {0, 1, 2};
  int anchor = 3;
  int l_max = 10;
};

int run_spectrum(const SpectrumArgs& args) {
  const auto frames = xyz::read_trajectory(args.input);
  std::vector<inject::Configuration> dataset;
  for (const auto& f : frames) dataset.push_back(f.config);
  const bandwidth::FrameSpec spec{args.frame[0], args.frame[1], args.frame[2],
                                  args.anchor};
  const auto spectrum =
      bandwidth::natural_energy_spectrum(dataset, spec, args.l_max);

  json report;
  report["resolved_config"] = {{"command", "spectrum"}, {"input", args.input},
                               {"frame", args.frame},   {"anchor", args.anchor},
                               {"l_max", args.l_max},   {"seed", args.common.seed}};
  report["power"] = spectrum.power;
  report["frac_above_2"] = spectrum.frac_above_2;
  report["frac_above_4"] = spectrum.frac_above_4;
  report["peaks"] = {{{"l", spectrum.peaks[0].first},
                      {"share", spectrum.peaks[0].second}},
                     {{"l", spectrum.peaks[1].first},
                      {"share", spectrum.peaks[1].second}}};
  report["ridge_fallback"] = spectrum.ridge_fallback;

  std::string text =
      "energy spectrum over " + std::to_string(dataset.size()) + " frames: " +
      fmt(100.0 * spectrum.frac_above_2, 4) + "% power above l = 2, " +
      fmt(100.0 * spectrum.frac_above_4, 4) + "% above l = 4; peaks at l = " +
      std::to_string(spectrum.peaks[0].first) + " (" +
      fmt(100.0 * spectrum.peaks[0].second, 3) + "%), l = " +
      std::to_string(spectrum.peaks[1].first) + " (" +
      fmt(100.0 * spectrum.peaks[1].second, 3) + "%)\n";
  emit(args.common, "spectrum.json", report, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "shprobe: spectral-injection diagnostics for angular-frequency reach "
      "of equivariant readouts.\n"
      "Exit codes: 0 ok, 2 parse, 3 degenerate frame, 4 leakage gate, "
      "5 resource guard, 6 empty input, 7 training failure, 8 io."};
  app.require_subcommand(1);
  app.fallthrough();  // main-app options (e.g. --config) may follow the command
  app.set_config("--config", "", "Key-value config file with per-command sections");

  InjectArgs inject_args;
  auto* inject_cmd =
      app.add_subcommand("inject", "Add a controlled angular-degree energy "
                                   "term and its exact forces to a trajectory");
  add_common(inject_cmd, inject_args.common);
  inject_cmd->add_option("--input", inject_args.input, "Extended-XYZ trajectory")
      ->required();
  inject_cmd->add_option("--output", inject_args.output, "Output file name")
      ->capture_default_str();
  inject_cmd->add_option("--l-inj", inject_args.l_inj, "Injection degree")
      ->capture_default_str();
  inject_cmd->add_option("--alpha", inject_args.alpha, "Amplitude (kcal/mol)")
      ->capture_default_str();
  inject_cmd->add_option("--frame", inject_args.frame, "Frame atom triple i,j,k")
      ->delimiter(',')
      ->expected(3);
  inject_cmd->add_option("--anchor", inject_args.anchor, "Anchor atom index")
      ->capture_default_str();
  inject_cmd
      ->add_option("--coeff-seed", inject_args.coeff_seed,
                   "Seed for the shared coefficient draw")
      ->capture_default_str();
  inject_cmd
      ->add_option("--split-seed", inject_args.split_seed,
                   "Seed for the leakage-screen partition")
      ->capture_default_str();
  inject_cmd
      ->add_option("--split-fracs", inject_args.split_fracs,
                   "Train/val/test fractions")
      ->delimiter(',')
      ->expected(3);
  inject_cmd
      ->add_option("--leak-lmax", inject_args.leak_lmax,
                   "Basis degree for the leakage screen (default l_inj)")
      ->capture_default_str();
  inject_cmd->add_flag("--skip-degenerate", inject_args.skip_degenerate,
                       "Drop frames failing the frame/anchor gates");
  inject_cmd->add_flag("--force", inject_args.force,
                       "Write output even when the leakage gate fails");

  GridArgs grid_args;
  auto* grid_cmd = app.add_subcommand(
      "grid", "Least-squares probe saturation sweep across (L, d) cells");
  add_common(grid_cmd, grid_args.common);
  grid_cmd->add_option("--cells", grid_args.cells,
                       "Cells as L,d (repeatable); default: the eight "
                       "standard cells");
  grid_cmd->add_option("--n", grid_args.n, "Samples per fit")
      ->capture_default_str();
  grid_cmd->add_option("--lmax-extra", grid_args.lmax_extra,
                       "Sweep degrees up to d*L + this")
      ->capture_default_str();

  HardCeilArgs hard_args;
  auto* hard_cmd = app.add_subcommand(
      "hardceil", "Linear-probe floor: bandlimited target vs one above");
  add_common(hard_cmd, hard_args.common);
  hard_cmd->add_option("--L", hard_args.L, "Feature degree")->capture_default_str();
  hard_cmd->add_option("--band", hard_args.band, "Target bandlimit (default L)")
      ->capture_default_str();
  hard_cmd->add_option("--n", hard_args.n, "Samples")->capture_default_str();

  SpnTrainArgs spn_args;
  auto* spn_cmd = app.add_subcommand(
      "spn-train", "Train the readout head on a synthetic invariant-"
                   "predictable target and gradient-check it");
  add_common(spn_cmd, spn_args.common);
  spn_cmd->add_option("--dr", spn_args.d_r, "Invariant extractor degree (1-3)")
      ->capture_default_str();
  spn_cmd
      ->add_option("--activation", spn_args.activation,
                   "identity | square | silu")
      ->capture_default_str();
  spn_cmd->add_option("--channels", spn_args.channels, "Feature channels")
      ->capture_default_str();
  spn_cmd->add_option("--l-max-feat", spn_args.l_max_feat, "Feature degree cap")
      ->capture_default_str();
  spn_cmd->add_option("--l-out", spn_args.l_out, "Output truncation")
      ->capture_default_str();
  spn_cmd->add_option("--samples", spn_args.samples, "Sample count")
      ->capture_default_str();
  spn_cmd->add_option("--epochs", spn_args.epochs, "Training epochs")
      ->capture_default_str();
  spn_cmd->add_option("--lr", spn_args.lr, "Learning rate")->capture_default_str();
  spn_cmd->add_option("--optimizer", spn_args.optimizer, "adam | gd")
      ->capture_default_str();
  spn_cmd->add_option("--theta-hidden", spn_args.theta_hidden,
                      "Hidden widths of the weight network")
      ->delimiter(',');
  spn_cmd->add_option("--phi-hidden", spn_args.phi_hidden,
                      "Hidden widths of the energy head")
      ->delimiter(',');

  DiagnoseArgs diag_args;
  auto* diag_cmd = app.add_subcommand(
      "diagnose", "Recovery-fraction table, cliff location, and guidance "
                  "from per-degree error triples");
  add_common(diag_cmd, diag_args.common);
  diag_cmd
      ->add_option("--input", diag_args.input,
                   "JSON file: rows of {l, y_low, y_arch, y_high} "
                   "(scalars or per-seed arrays)")
      ->required();
  diag_cmd->add_option("--dr", diag_args.d_r, "Readout degree")
      ->capture_default_str();
  diag_cmd->add_option("--L", diag_args.L, "Feature degree")->capture_default_str();
  diag_cmd
      ->add_option("--contrast", diag_args.contrast,
                   "Cliff factor: rho(l) / rho(l+1) threshold")
      ->capture_default_str();
  diag_cmd->add_option("--B", diag_args.B, "Bootstrap resamples")
      ->capture_default_str();

  BandwidthArgs band_args;
  auto* band_cmd = app.add_subcommand(
      "bandwidth", "Per-atom angular bandwidth of shell-weighted neighbor "
                   "densities");
  add_common(band_cmd, band_args.common);
  band_cmd->add_option("--input", band_args.input,
                       "Point-cloud file (element x y z; blank lines split "
                       "molecules) or extended-XYZ trajectory")
      ->required();
  band_cmd->add_option("--r-cut", band_args.r_cut, "Neighbor ball radius (A)")
      ->capture_default_str();
  band_cmd->add_option("--shell-mu", band_args.shell_mu, "Shell center (A)")
      ->capture_default_str();
  band_cmd->add_option("--shell-sigma", band_args.shell_sigma, "Shell width (A)")
      ->capture_default_str();
  band_cmd->add_option("--l-max", band_args.l_max, "Expansion degree")
      ->capture_default_str();
  band_cmd->add_option("--threshold", band_args.threshold,
                       "Cumulative-fraction threshold for l*")
      ->capture_default_str();
  band_cmd->add_option("--B", band_args.B, "Bootstrap resamples")
      ->capture_default_str();
  band_cmd->add_flag("--include-h", band_args.include_h,
                     "Keep hydrogen atoms (default: heavy atoms only)");
  band_cmd->add_option("--per-atom-csv", band_args.per_atom_csv,
                       "Also write per-atom profiles to this CSV file");

  SpectrumArgs spec_args;
  auto* spec_cmd = app.add_subcommand(
      "spectrum", "Body-frame angular decomposition of per-frame energies");
  add_common(spec_cmd, spec_args.common);
  spec_cmd->add_option("--input", spec_args.input, "Extended-XYZ trajectory")
      ->required();
  spec_cmd->add_option("--frame", spec_args.frame, "Frame atom triple i,j,k")
      ->delimiter(',')
      ->expected(3);
  spec_cmd->add_option("--anchor", spec_args.anchor, "Anchor atom index")
      ->capture_default_str();
  spec_cmd->add_option("--l-max", spec_args.l_max, "Expansion degree")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (inject_cmd->parsed()) return run_inject(inject_args);
    if (grid_cmd->parsed()) return run_grid(grid_args);
    if (hard_cmd->parsed()) return run_hardceil(hard_args);
    if (spn_cmd->parsed()) return run_spn_train(spn_args);
    if (diag_cmd->parsed()) return run_diagnose(diag_args);
    if (band_cmd->parsed()) return run_bandwidth(band_args);
    if (spec_cmd->parsed()) return run_spectrum(spec_args);
  } catch (const DegenerateFrameError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const DegenerateAnchorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kResource;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTraining;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

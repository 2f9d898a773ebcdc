#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shprobe/bandwidth.hpp"
#include "shprobe/errors.hpp"
#include "shprobe/gaunt.hpp"
#include "shprobe/inject.hpp"
#include "shprobe/metrics.hpp"
#include "shprobe/probe.hpp"
#include "shprobe/sh.hpp"
#include "shprobe/spn.hpp"
#include "shprobe/xyz.hpp"

namespace py = pybind11;
using namespace shprobe;

namespace {

sh::Direction to_dir(const std::array<double, 3>& v) {
  return sh::Direction{v[0], v[1], v[2]};
}

std::array<double, 3> from_dir(const sh::Direction& d) { return {d.x, d.y, d.z}; }

sh::SHVector to_shvector(const std::vector<double>& coeffs) {
  const int degree = static_cast<int>(std::lround(std::sqrt(
                         static_cast<double>(coeffs.size())))) -
                     1;
  if (static_cast<std::size_t>((degree + 1) * (degree + 1)) != coeffs.size())
    throw ArgumentError("coefficient list length must be a perfect square");
  sh::SHVector v(degree);
  v.coeffs = coeffs;
  return v;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral-injection diagnostics for the angular-frequency reach "
            "of equivariant readouts";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ResourceError>(m, "ResourceError", PyExc_RuntimeError);
  py::register_exception<DegenerateFrameError>(m, "DegenerateFrameError",
                                               PyExc_ValueError);
  py::register_exception<DegenerateAnchorError>(m, "DegenerateAnchorError",
                                                PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  // --- spherical harmonics ---------------------------------------------
  m.attr("MAX_DEGREE") = sh::kMaxDegree;
  m.def(
      "eval_sh",
      [](int l, int mm, const std::array<double, 3>& dir) {
        return sh::eval_sh(l, mm, to_dir(dir));
      },
      py::arg("l"), py::arg("m"), py::arg("dir"),
      "Real orthonormal spherical harmonic at a unit direction");
  m.def(
      "feature_vector",
      [](int degree, const std::array<double, 3>& dir) {
        return sh::feature_vector(degree, to_dir(dir)).coeffs;
      },
      py::arg("degree"), py::arg("dir"),
      "All Y_l^m for l <= degree, flat index l^2 + l + m");

  py::class_<sh::QuadratureGrid>(m, "QuadratureGrid")
      .def_property_readonly("size", &sh::QuadratureGrid::size)
      .def_property_readonly("nodes",
                             [](const sh::QuadratureGrid& g) {
                               std::vector<std::array<double, 3>> out;
                               for (const auto& n : g.nodes)
                                 out.push_back(from_dir(n));
                               return out;
                             })
      .def_readonly("weights", &sh::QuadratureGrid::weights);
  m.def("build_grid", &sh::build_grid, py::arg("resolution"));
  m.def(
      "project",
      [](const std::vector<double>& samples, const sh::QuadratureGrid& grid,
         int degree) { return sh::project(samples, grid, degree).coeffs; },
      py::arg("samples"), py::arg("grid"), py::arg("degree"));
  m.def(
      "synthesize",
      [](const std::vector<double>& coeffs, const std::array<double, 3>& dir) {
        return sh::synthesize(to_shvector(coeffs), to_dir(dir));
      },
      py::arg("coeffs"), py::arg("dir"));

  // --- Gaunt algebra and span checks -------------------------------------
  py::class_<cg::GauntTable>(m, "GauntTable")
      .def(py::init<int>(), py::arg("max_degree"))
      .def("coefficient", &cg::GauntTable::coefficient, py::arg("l1"),
           py::arg("m1"), py::arg("l2"), py::arg("m2"), py::arg("l3"),
           py::arg("m3"))
      .def("save", &cg::GauntTable::save, py::arg("path"))
      .def_static("load", &cg::GauntTable::load, py::arg("path"))
      .def_property_readonly("max_degree", &cg::GauntTable::max_degree);
  m.def(
      "product_expand",
      [](const std::vector<double>& a, const std::vector<double>& b,
         const cg::GauntTable& t) {
        return cg::product_expand(to_shvector(a), to_shvector(b), t).coeffs;
      },
      py::arg("a"), py::arg("b"), py::arg("table"));
  m.def(
      "monomial_to_sh",
      [](const std::vector<std::pair<int, int>>& factors,
         const cg::GauntTable& t) {
        return cg::monomial_to_sh(cg::MonomialSpec{factors}, t).coeffs;
      },
      py::arg("factors"), py::arg("table"));
  m.def("span_rank", &cg::span_rank, py::arg("L"), py::arg("d"), py::arg("n"),
        py::arg("table"));
  m.def("stretched_top_coefficient", &cg::stretched_top_coefficient,
        py::arg("L"), py::arg("q"), py::arg("r"), py::arg("table"));
  m.def("weight_multiplicity", &cg::weight_multiplicity, py::arg("L"),
        py::arg("d"));

  // --- injection ----------------------------------------------------------
  py::class_<inject::Configuration>(m, "Configuration")
      .def(py::init<>())
      .def_readwrite("positions", &inject::Configuration::positions)
      .def_readwrite("energy", &inject::Configuration::energy)
      .def_readwrite("forces", &inject::Configuration::forces);

  py::class_<inject::FrameResult>(m, "FrameResult")
      .def_readonly("R", &inject::FrameResult::R)
      .def_readonly("sigma_min", &inject::FrameResult::sigma_min);

  py::class_<inject::InjectionSpec>(m, "InjectionSpec")
      .def_static("make", &inject::InjectionSpec::make, py::arg("l_inj"),
                  py::arg("alpha"), py::arg("i"), py::arg("j"), py::arg("k"),
                  py::arg("a"), py::arg("coeff_seed"))
      .def_readwrite("l_inj", &inject::InjectionSpec::l_inj)
      .def_readwrite("alpha", &inject::InjectionSpec::alpha)
      .def_readwrite("c", &inject::InjectionSpec::c)
      .def_readonly("coeff_seed", &inject::InjectionSpec::coeff_seed);

  m.def("body_frame", &inject::body_frame, py::arg("positions"), py::arg("i"),
        py::arg("j"), py::arg("k"));
  m.def(
      "canonical_direction",
      [](const inject::Positions& pos, const inject::FrameResult& frame, int a) {
        return from_dir(inject::canonical_direction(pos, frame, a));
      },
      py::arg("positions"), py::arg("frame"), py::arg("a"));
  m.def("injected_energy", &inject::injected_energy, py::arg("positions"),
        py::arg("spec"));
  m.def("injected_forces", &inject::injected_forces, py::arg("positions"),
        py::arg("spec"));
  m.def(
      "inject_dataset",
      [](const std::vector<inject::Configuration>& dataset,
         const inject::InjectionSpec& spec, bool skip_degenerate) {
        inject::InjectionReport report;
        auto out = inject::inject_dataset(dataset, spec, &report, skip_degenerate);
        py::list rejections;
        for (const auto& r : report.rejections)
          rejections.append(py::make_tuple(r.frame_index, r.reason));
        return py::make_tuple(out, rejections);
      },
      py::arg("dataset"), py::arg("spec"), py::arg("skip_degenerate") = false);
  m.def("amplitude_calibrate", &inject::amplitude_calibrate, py::arg("f_nat"),
        py::arg("f_1x"), py::arg("k"));
  m.def("variance_share", &inject::variance_share, py::arg("nat"),
        py::arg("inj"));
  m.def(
      "split_leakage",
      [](const std::vector<std::vector<double>>& splits) {
        const auto res = inject::split_leakage(splits);
        return py::make_tuple(res.rho2_max, res.reject, res.undefined_pairs);
      },
      py::arg("split_coeffs"));
  m.def("force_scale", &inject::force_scale, py::arg("dataset"));
  m.attr("LEAKAGE_GATE") = inject::kLeakageGate;

  // --- polynomial probe ---------------------------------------------------
  m.def(
      "poly_features",
      [](const std::vector<double>& phi, int d) {
        return probe::poly_features(to_shvector(phi), d);
      },
      py::arg("phi"), py::arg("d"));
  py::class_<probe::ProbeResult>(m, "ProbeResult")
      .def_readonly("r_squared", &probe::ProbeResult::r_squared)
      .def_readonly("mse", &probe::ProbeResult::mse)
      .def_readonly("target_variance", &probe::ProbeResult::target_variance)
      .def_readonly("degenerate_variance", &probe::ProbeResult::degenerate_variance)
      .def_readonly("pinv_fallback", &probe::ProbeResult::pinv_fallback)
      .def_property_readonly("weights", [](const probe::ProbeResult& r) {
        return std::vector<double>(r.weights.data(),
                                   r.weights.data() + r.weights.size());
      });
  m.def(
      "fit_poly_probe",
      [](const std::vector<std::array<double, 3>>& dirs,
         const std::vector<double>& targets, int L, int d, double ridge,
         const std::string& solver) {
        std::vector<sh::Direction> ds;
        for (const auto& v : dirs) ds.push_back(to_dir(v));
        probe::PolyProbeConfig cfg;
        cfg.L = L;
        cfg.d = d;
        cfg.ridge = ridge;
        cfg.n = static_cast<int>(dirs.size());
        return probe::fit_poly_probe(ds, targets, cfg,
                                     solver == "qr" ? probe::Solver::QR
                                                    : probe::Solver::NormalEquations);
      },
      py::arg("dirs"), py::arg("targets"), py::arg("L"), py::arg("d"),
      py::arg("ridge") = 1e-10, py::arg("solver") = "normal");
  m.def(
      "synth_target",
      [](int l, std::uint64_t seed) {
        const auto t = probe::synth_target(l, seed);
        return py::make_tuple(t.l, t.c);
      },
      py::arg("l"), py::arg("coeff_seed"),
      "Returns (l, unit-norm coefficient list)");
  m.def(
      "sample_directions",
      [](int n, std::uint64_t seed) {
        std::vector<std::array<double, 3>> out;
        for (const auto& d : probe::sample_directions(n, seed))
          out.push_back(from_dir(d));
        return out;
      },
      py::arg("n"), py::arg("seed"));
  m.def(
      "saturation_grid",
      [](const std::vector<std::pair<int, int>>& cells, int l_max_extra, int n,
         std::uint64_t seed, int threads) {
        py::list rows;
        for (const auto& row :
             probe::saturation_grid(cells, l_max_extra, n, seed, threads)) {
          py::dict r;
          r["L"] = row.L;
          r["d"] = row.d;
          r["r2_at_ceiling"] = row.r2_at_ceiling;
          r["r2_above_ceiling"] = row.r2_above_ceiling;
          r["delta_r2"] = row.delta_r2;
          py::list sweep;
          for (const auto& cell : row.cells)
            sweep.append(py::make_tuple(cell.l, cell.result.r_squared,
                                        cell.result.mse));
          r["sweep"] = sweep;
          rows.append(r);
        }
        return rows;
      },
      py::arg("cells"), py::arg("l_max_extra") = 3, py::arg("n") = 4000,
      py::arg("seed") = 0, py::arg("threads") = 1);
  m.def("default_grid_cells", &probe::default_grid_cells);
  m.def(
      "hard_ceiling_check",
      [](int L, int band, std::uint64_t seed, int n) {
        const auto hc = probe::hard_ceiling_check(L, band, seed, n);
        return py::make_tuple(hc.mse_within, hc.mse_above, hc.var_above);
      },
      py::arg("L"), py::arg("band"), py::arg("seed"), py::arg("n") = 4000);

  // --- readout head --------------------------------------------------------
  py::class_<spn::Features>(m, "SpnFeatures")
      .def_static("random", &spn::Features::random, py::arg("l_max"),
                  py::arg("channels"), py::arg("seed"))
      .def_readwrite("blocks", &spn::Features::blocks)
      .def_readonly("l_max", &spn::Features::l_max)
      .def_readonly("channels", &spn::Features::channels);
  py::class_<spn::SpnParams>(m, "SpnParams")
      .def_property_readonly("parameter_count", &spn::SpnParams::parameter_count)
      .def_readonly("d_r", &spn::SpnParams::d_r)
      .def_readonly("l_out", &spn::SpnParams::l_out);
  m.def(
      "spn_init",
      [](int d_r, int l_max_feat, int channels, int l_out,
         const std::string& activation, std::uint64_t seed,
         const std::vector<int>& theta_hidden, const std::vector<int>& phi_hidden) {
        return spn::init_params(d_r, l_max_feat, channels, l_out,
                                spn::activation_from_tag(activation), seed,
                                theta_hidden, phi_hidden);
      },
      py::arg("d_r"), py::arg("l_max_feat"), py::arg("channels"),
      py::arg("l_out"), py::arg("activation"), py::arg("seed"),
      py::arg("theta_hidden") = std::vector<int>{128, 128},
      py::arg("phi_hidden") = std::vector<int>{64});
  m.def("spn_forward", &spn::spn_forward, py::arg("features"), py::arg("params"),
        py::arg("table"));
  m.def(
      "extract_invariants",
      [](const spn::Features& f, int d_r, const cg::GauntTable& t) {
        const Eigen::VectorXd s = spn::extract_invariants(f, d_r, t);
        return std::vector<double>(s.data(), s.data() + s.size());
      },
      py::arg("features"), py::arg("d_r"), py::arg("table"));
  m.def(
      "spn_train",
      [](const std::vector<spn::Features>& samples,
         const std::vector<double>& targets, const spn::SpnParams& params,
         const cg::GauntTable& table, int epochs, double lr,
         const std::string& optimizer, double weight_decay) {
        spn::TrainOptions opts;
        opts.epochs = epochs;
        opts.lr = lr;
        opts.optimizer = optimizer == "gd" ? spn::Optimizer::GradientDescent
                                           : spn::Optimizer::Adam;
        opts.weight_decay = weight_decay;
        const auto res = spn::spn_train(samples, targets, params, table, opts);
        py::dict out;
        out["best"] = res.best;
        out["best_val_mse"] = res.best_val_mse;
        out["best_epoch"] = res.best_epoch;
        out["train_loss"] = res.train_loss;
        out["val_loss"] = res.val_loss;
        return out;
      },
      py::arg("samples"), py::arg("targets"), py::arg("params"),
      py::arg("table"), py::arg("epochs") = 300, py::arg("lr") = 1e-3,
      py::arg("optimizer") = "adam", py::arg("weight_decay") = 0.0);
  m.def(
      "spn_gradient_check",
      [](const std::vector<spn::Features>& batch,
         const std::vector<double>& targets, const spn::SpnParams& params,
         const cg::GauntTable& table, int probes, std::uint64_t seed) {
        const auto check =
            spn::spn_gradient_check(batch, targets, params, table, probes, seed);
        return py::make_tuple(check.max_rel_error, check.checked);
      },
      py::arg("batch"), py::arg("targets"), py::arg("params"), py::arg("table"),
      py::arg("probes") = 10, py::arg("seed") = 0);

  // --- metrics --------------------------------------------------------------
  m.def(
      "normalized_error",
      [](double mae, double sigma_f) {
        return metrics::normalized_error(mae, sigma_f).y;
      },
      py::arg("force_mae"), py::arg("sigma_f"));
  m.def("force_mae", &metrics::force_mae, py::arg("pred"), py::arg("truth"));
  m.def(
      "recovery_fraction",
      [](double y_low, double y_arch, double y_high) {
        const auto r = metrics::recovery_fraction(y_low, y_arch, y_high);
        py::object rho = r.rho ? py::cast(*r.rho) : py::none();
        return py::make_tuple(rho, r.delta);
      },
      py::arg("y_low"), py::arg("y_arch"), py::arg("y_high"),
      "Returns (rho or None, delta)");
  m.def(
      "sharpness",
      [](double rho_at, double rho_above) {
        const auto s = metrics::sharpness(rho_at, rho_above);
        return s.value ? py::cast(*s.value) : py::none();
      },
      py::arg("rho_at"), py::arg("rho_above"));
  m.def(
      "sharpness_from_deltas",
      [](double delta_at, double delta_above) {
        const auto s = metrics::sharpness_from_deltas(delta_at, delta_above);
        return s.value ? py::cast(*s.value) : py::none();
      },
      py::arg("delta_at"), py::arg("delta_above"));
  m.def("r2_injected", &metrics::r2_injected, py::arg("delta_f_pred"),
        py::arg("f_inj"));
  m.def(
      "bootstrap_mean_ci",
      [](const std::vector<double>& values, int B, std::uint64_t seed) {
        const auto ci = metrics::bootstrap_mean_ci(values, B, seed);
        return py::make_tuple(ci.mean, ci.lo, ci.hi);
      },
      py::arg("values"), py::arg("B"), py::arg("rng_seed"));
  m.def(
      "cluster_bootstrap_contrast",
      [](const std::vector<double>& at, const std::vector<double>& above, int B,
         std::uint64_t seed) {
        const auto c = metrics::cluster_bootstrap_contrast(at, above, B, seed);
        py::dict out;
        out["ratio"] = c.ratio;
        out["diff"] = c.diff;
        out["ratio_ci"] = py::make_tuple(c.ratio_ci.lo, c.ratio_ci.hi);
        out["diff_ci"] = py::make_tuple(c.diff_ci.lo, c.diff_ci.hi);
        out["excluded_resamples"] = c.excluded_resamples;
        out["leave_one_out_ratios"] = c.leave_one_out_ratios;
        return out;
      },
      py::arg("delta_at"), py::arg("delta_above"), py::arg("B"),
      py::arg("rng_seed"));

  // --- bandwidth -------------------------------------------------------------
  m.def(
      "neighbor_density_coeffs",
      [](const inject::Positions& positions, int center, double r_cut,
         double mu, double sigma, int l_max) {
        bandwidth::ShellKernel kernel{r_cut, mu, sigma, l_max};
        const auto d = bandwidth::neighbor_density_coeffs(positions, center,
                                                          kernel);
        return py::make_tuple(d.coeffs.coeffs, d.neighbor_count, d.empty);
      },
      py::arg("positions"), py::arg("center"), py::arg("r_cut") = 5.0,
      py::arg("shell_mu") = 2.5, py::arg("shell_sigma") = 1.0,
      py::arg("l_max") = 10);
  m.def(
      "bandwidth_lstar",
      [](const std::vector<double>& coeffs, double threshold) {
        const auto p = bandwidth::bandwidth_lstar(to_shvector(coeffs), threshold);
        return py::make_tuple(p.w, p.lstar, p.undefined);
      },
      py::arg("coeffs"), py::arg("threshold") = 0.95);
  m.def(
      "natural_energy_spectrum",
      [](const std::vector<inject::Configuration>& dataset, int i, int j, int k,
         int a, int l_max) {
        const auto s = bandwidth::natural_energy_spectrum(
            dataset, bandwidth::FrameSpec{i, j, k, a}, l_max);
        py::dict out;
        out["power"] = s.power;
        out["frac_above_2"] = s.frac_above_2;
        out["frac_above_4"] = s.frac_above_4;
        out["peaks"] = py::make_tuple(s.peaks[0], s.peaks[1]);
        out["ridge_fallback"] = s.ridge_fallback;
        return out;
      },
      py::arg("dataset"), py::arg("i"), py::arg("j"), py::arg("k"),
      py::arg("a"), py::arg("l_max") = 10);

  // --- trajectory io ----------------------------------------------------------
  m.def(
      "read_trajectory",
      [](const std::string& path) {
        py::list out;
        for (const auto& f : xyz::read_trajectory(path))
          out.append(py::make_tuple(f.symbols, f.config));
        return out;
      },
      py::arg("path"));
  m.def(
      "write_trajectory",
      [](const std::string& path,
         const std::vector<std::pair<std::vector<std::string>,
                                     inject::Configuration>>& frames) {
        std::vector<xyz::Frame> out;
        for (const auto& [symbols, config] : frames)
          out.push_back(xyz::Frame{symbols, config});
        xyz::write_trajectory(path, out);
      },
      py::arg("path"), py::arg("frames"));
}

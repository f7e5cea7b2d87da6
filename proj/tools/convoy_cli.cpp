#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "convoy/io.hpp"

using namespace convoy;
using convoy::io::json;

namespace {

std::string keys_footer() {
  std::string out = "Config keys (JSON object, SI units):\n";
  for (const auto& [key, unit] : io::config_keys()) out += fmt::format("  {:<18} {}\n", key, unit);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "input: cannot open '" + path + "'");
  return in;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, "output: cannot write '" + path + "'");
  out << text;
}

Gains<double> to_gains(const std::vector<double>& g) {
  if (g.size() != 3) throw Error(ErrorKind::Config, "gains: expected ke,ktheta,komega");
  return {g[0], g[1], g[2]};
}

std::vector<double> mph_to_mps(const std::vector<double>& mph) {
  std::vector<double> out;
  for (double v : mph) out.push_back(v * kMphToMps);
  return out;
}

Axis to_axis(const std::vector<double>& v, const char* name) {
  if (v.size() != 3 || v[2] < 1 || v[2] != std::floor(v[2]))
    throw Error(ErrorKind::Config, std::string(name) + ": expected lo,hi,count");
  return {v[0], v[1], static_cast<int>(v[2])};
}

// Vehicle parameters for the analysis subcommands: preset plus optional JSON overrides.
struct ModelOptions {
  std::string config;
  ConvoyConfig load() const {
    ConvoyConfig c;
    if (!config.empty()) {
      auto in = open_in(config);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, std::string("config: ") + e.what());
      }
      c = io::apply_config(j, c);
    }
    c.params.validate();
    c.actuator.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lateral control of connected vehicle convoys"};
  app.require_subcommand(1);
  app.footer(keys_footer());

  ModelOptions model;
  std::vector<double> gains_in;
  std::vector<double> speeds_mph{10, 20, 30, 40, 50, 60, 67};

  // sim
  auto* sim = app.add_subcommand("sim", "Simulate a convoy; write trace CSV and string-stability JSON");
  std::string trace_path, report_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> arch;
  std::optional<double> alpha;
  sim->add_option("--config", model.config, "JSON config file");
  sim->add_option("--trace", trace_path, "trace CSV output");
  sim->add_option("--report", report_path, "report JSON output (default stdout)");
  sim->add_option("--seed", seed, "noise seed");
  sim->add_option("--arch", arch, "composite | separate")->check(CLI::IsMember({"composite", "separate"}));
  sim->add_option("--alpha", alpha, "weight on the preceding-vehicle trajectory");
  sim->add_option("--gains", gains_in, "ke,ktheta,komega")->delimiter(',')->expected(3);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit an arc-spline target to source,x,y,t samples");
  std::string samples_path, fit_out, target_path;
  double epsilon = PreviewConfig{}.epsilon;
  std::vector<double> ego_in;
  fit->add_option("samples", samples_path, "CSV with header source,x,y,t (in travel order)");
  fit->add_option("--epsilon", epsilon, "line-prefix threshold (m)");
  fit->add_option("--ego", ego_in, "x,y,heading[,yaw_rate,vx,vy]: also report tracking errors")->delimiter(',');
  fit->add_option("--target", target_path, "evaluate errors against this spline JSON instead of fitting");
  fit->add_option("--output", fit_out, "JSON output (default stdout)");

  // stabset
  auto* stabset = app.add_subcommand("stabset", "Classify a gain grid at each speed and over their intersection");
  std::string grid_csv, summary_path;
  std::vector<double> ke_axis, kt_axis, kw_axis;
  stabset->add_option("--config", model.config, "JSON config file (vehicle keys)");
  stabset->add_option("--speeds-mph", speeds_mph, "speeds (mph)")->delimiter(',');
  stabset->add_option("--ke", ke_axis, "lo,hi,count")->delimiter(',');
  stabset->add_option("--ktheta", kt_axis, "lo,hi,count")->delimiter(',');
  stabset->add_option("--komega", kw_axis, "lo,hi,count")->delimiter(',');
  stabset->add_option("--gains", gains_in, "probe gains ke,ktheta,komega")->delimiter(',')->expected(3);
  stabset->add_option("--csv", grid_csv, "grid classification CSV output");
  stabset->add_option("--summary", summary_path, "summary JSON output (default stdout)");

  // check-gains
  auto* check = app.add_subcommand("check-gains", "Check a gain triple at a list of speeds");
  std::string check_out;
  check->add_option("--config", model.config, "JSON config file (vehicle keys)");
  check->add_option("--gains", gains_in, "ke,ktheta,komega")->delimiter(',')->expected(3);
  check->add_option("--speeds-mph", speeds_mph, "speeds (mph)")->delimiter(',');
  check->add_option("--output", check_out, "JSON output (default stdout)");

  // eigsweep
  auto* sweep = app.add_subcommand("eigsweep", "Maximum closed-loop real eigenvalue over a speed range");
  double v_lo = 10 * kMphToMps, v_hi = 30;
  int points = 50;
  std::string sweep_out;
  sweep->add_option("--config", model.config, "JSON config file (vehicle keys)");
  sweep->add_option("--gains", gains_in, "ke,ktheta,komega")->delimiter(',')->expected(3);
  sweep->add_option("--vmin", v_lo, "lowest speed (m/s)");
  sweep->add_option("--vmax", v_hi, "highest speed (m/s)");
  sweep->add_option("--points", points, "number of speeds")->check(CLI::PositiveNumber);
  sweep->add_option("--output", sweep_out, "JSON output (default stdout)");

  // tvcheck
  auto* tv = app.add_subcommand("tvcheck", "Check the time-varying speed conditions for a t,vx profile");
  std::string profile_path, tv_out;
  double sigma = 0.05;
  tv->add_option("profile", profile_path, "CSV with header t,vx")->required();
  tv->add_option("--config", model.config, "JSON config file (vehicle keys)");
  tv->add_option("--gains", gains_in, "ke,ktheta,komega")->delimiter(',')->expected(3);
  tv->add_option("--sigma", sigma, "required eigenvalue margin (1/s)");
  tv->add_option("--vmin", v_lo, "lowest admissible speed (m/s)");
  tv->add_option("--vmax", v_hi, "highest admissible speed (m/s)");
  tv->add_option("--output", tv_out, "JSON output (default stdout)");

  for (auto* sub : app.get_subcommands({})) sub->footer(keys_footer());

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*sim) {
      ConvoyConfig cfg = model.load();
      if (seed) cfg.seed = *seed;
      if (arch) cfg.architecture.mode = *arch == "separate" ? Architecture::Separate : Architecture::Composite;
      if (alpha) cfg.architecture.alpha = *alpha;
      if (!gains_in.empty()) cfg.gains = to_gains(gains_in);
      cfg.validate();
      ConvoyResult result;
      try {
        result = run(cfg);
      } catch (const SimulationAborted& e) {
        if (!trace_path.empty()) {
          std::ostringstream csv;
          io::write_trace_csv(csv, e.trace());
          emit(trace_path, csv.str());
        }
        throw;
      }
      if (!trace_path.empty()) {
        std::ostringstream csv;
        io::write_trace_csv(csv, result.trace);
        emit(trace_path, csv.str());
      }
      emit(report_path, io::report_to_json(result.report).dump(2) + "\n");
    } else if (*fit) {
      std::optional<GroundState<double>> ego;
      if (!ego_in.empty()) {
        if (ego_in.size() < 3 || ego_in.size() > 6) throw Error(ErrorKind::Config, "ego: expected x,y,heading[,yaw_rate,vx,vy]");
        ego_in.resize(6, 0.0);
        ego = GroundState<double>{ego_in[0], ego_in[1], ego_in[2], ego_in[3], ego_in[4], ego_in[5]};
      }
      json out;
      ArcSpline<double> spline;
      if (!target_path.empty()) {
        auto in = open_in(target_path);
        spline = io::spline_from_json(json::parse(in));
        out = io::spline_to_json(spline);
      } else {
        if (samples_path.empty()) throw Error(ErrorKind::Config, "samples: a CSV path is required");
        auto in = open_in(samples_path);
        const auto samples = io::read_samples_csv(in);
        auto fitted = build_target(std::span<const GpsSample>(samples), epsilon);
        if (!fitted) throw Error(ErrorKind::InsufficientData, "fit: degenerate or insufficient samples");
        spline = *fitted;
        out = io::spline_to_json(spline);
      }
      if (ego) {
        const auto idx = active_segment_index(spline, *ego);
        out["active_segment"] = idx;
        out["errors"] = io::errors_to_json(errors(*ego, spline.segments[idx]));
      }
      emit(fit_out, out.dump(2) + "\n");
    } else if (*stabset) {
      const ConvoyConfig cfg = model.load();
      GridSpec grid;
      if (!ke_axis.empty()) grid.ke = to_axis(ke_axis, "ke");
      if (!kt_axis.empty()) grid.ktheta = to_axis(kt_axis, "ktheta");
      if (!kw_axis.empty()) grid.komega = to_axis(kw_axis, "komega");
      grid.validate();
      const Gains<double> probe = gains_in.empty() ? cfg.gains : to_gains(gains_in);
      std::vector<StabRegion> regions;
      for (double v : mph_to_mps(speeds_mph)) regions.push_back(stab_region(cfg.params, cfg.actuator, v, grid));
      const StabRegion all = intersect_regions(regions);
      if (!grid_csv.empty()) {
        std::ostringstream csv;
        auto rows = regions;
        rows.push_back(all);
        io::write_region_csv(csv, rows);
        emit(grid_csv, csv.str());
      }
      json per_speed = json::array();
      for (const auto& r : regions) per_speed.push_back(io::region_summary(r, probe));
      emit(summary_path, json{{"per_speed", per_speed}, {"intersection", io::region_summary(all, probe)}}.dump(2) + "\n");
    } else if (*check) {
      const ConvoyConfig cfg = model.load();
      const Gains<double> k = gains_in.empty() ? cfg.gains : to_gains(gains_in);
      json rows = json::array();
      bool all_stable = true;
      for (std::size_t i = 0; i < speeds_mph.size(); ++i) {
        const double v = speeds_mph[i] * kMphToMps;
        const auto poly = char_coeffs(cfg.params, cfg.actuator, k, v);
        const StabilityClass cls = hurwitz(poly);
        const double eig = max_real_eigenvalue(assemble_A(cfg.params, cfg.actuator, k, 1.0 / v).matrix());
        all_stable = all_stable && cls == StabilityClass::Stable && eig < 0;
        rows.push_back({{"speed_mph", speeds_mph[i]},
                        {"speed", v},
                        {"class", to_string(cls)},
                        {"max_real_eigenvalue", eig}});
      }
      const std::string verdict = all_stable ? "stable at all speeds" : "not stable at all speeds";
      emit(check_out, json{{"gains", {k.ke, k.ktheta, k.komega}}, {"speeds", rows}, {"verdict", verdict}}.dump(2) + "\n");
      if (!all_stable) {
        std::cerr << verdict << '\n';
        return 1;
      }
    } else if (*sweep) {
      const ConvoyConfig cfg = model.load();
      const Gains<double> k = gains_in.empty() ? cfg.gains : to_gains(gains_in);
      if (!(v_lo >= kMinSpeed && v_hi >= v_lo)) throw Error(ErrorKind::Config, "vmin: need 1 <= vmin <= vmax");
      std::vector<double> speeds;
      for (int i = 0; i < points; ++i)
        speeds.push_back(points == 1 ? v_lo : v_lo + (v_hi - v_lo) * i / (points - 1));
      const auto eig = eigen_sweep(cfg.params, cfg.actuator, k, speeds);
      json rows = json::array();
      for (std::size_t i = 0; i < speeds.size(); ++i)
        rows.push_back({{"speed", speeds[i]}, {"gamma", 1.0 / speeds[i]}, {"max_real_eigenvalue", eig[i]}});
      emit(sweep_out, json{{"gains", {k.ke, k.ktheta, k.komega}},
                           {"sweep", rows},
                           {"max_real_eigenvalue", *std::max_element(eig.begin(), eig.end())}}
                          .dump(2) + "\n");
    } else if (*tv) {
      const ConvoyConfig cfg = model.load();
      const Gains<double> k = gains_in.empty() ? cfg.gains : to_gains(gains_in);
      auto in = open_in(profile_path);
      const SpeedProfile prof = io::read_speed_profile_csv(in);
      const auto r = check_time_varying(prof, cfg.params, cfg.actuator, k, sigma, v_lo, v_hi);
      emit(tv_out, json{{"v_min", r.v_min},
                        {"v_max", r.v_max},
                        {"sigma", r.sigma},
                        {"max_real_eigenvalue", r.max_real_eigenvalue},
                        {"eig_margin_ok", r.eig_margin_ok},
                        {"accel_energy", r.accel_energy},
                        {"gamma_rate_bound", r.gamma_rate_bound},
                        {"matrix_norm_bound", r.matrix_norm_bound},
                        {"derivative_energy_bound", r.derivative_energy_bound},
                        {"bounded_ok", r.bounded_ok},
                        {"energy_ok", r.energy_ok},
                        {"ok", r.ok()}}
                           .dump(2) + "\n");
      if (!r.ok()) {
        std::cerr << "time-varying conditions not met\n";
        return 1;
      }
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: divergence at t=" << io::format_number(e.time()) << ": " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Schedule ? 2 : 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

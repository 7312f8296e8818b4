#pragma once

// Subcommands behind the csc binary. Each returns a process exit status:
// 0 ok, 1 a check reported failure (basis-check only), 2 config or argument error,
// 3 I/O error, 4 simulation error.

#include "csc/app/config.hpp"
#include "csc/app/report.hpp"
#include "csc/app/writers.hpp"
#include "csc/two_disc.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>

namespace csc::app {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kIoError = 3, kSimError = 4 };

struct Overrides {
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
};

inline void apply_overrides(ScenarioConfig& c, const Overrides& o) {
  if (o.dt) {
    if (!(*o.dt > 0)) throw Error(Errc::ConfigParse, "--dt must be positive");
    c.dt = *o.dt;
  }
  if (o.horizon) {
    if (!(*o.horizon >= 0)) throw Error(Errc::ConfigParse, "--horizon must be nonnegative");
    c.horizon = *o.horizon;
  }
  if (o.seed) c.seed = *o.seed;
}

inline void make_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw Error(Errc::Io, "cannot create output directory " + dir);
}

inline std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

struct RunResult {
  Scenario scenario;
  AuditReport audit;
  Trajectory trajectory;
  TrajectoryMetrics metrics;
  double runtime_s = 0;
};

/// Audits and simulation without touching the file system.
inline RunResult run_scenario(const ScenarioConfig& cfg) {
  RunResult r;
  r.scenario = build_scenario(cfg);
  r.audit = run_audits(r.scenario);
  const auto ctl = build_cascade_controller(r.scenario.layer, r.scenario.gains);
  const auto t0 = std::chrono::steady_clock::now();
  r.trajectory = run_closed_loop(r.scenario.plant, ctl, r.scenario.certs, r.scenario.x0, r.scenario.opt);
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.metrics = trajectory_metrics(r.trajectory);
  return r;
}

inline int cmd_run(const std::string& config_path, const std::string& out_dir, const Overrides& ov, std::ostream& out,
                   std::ostream& err) {
  ScenarioConfig cfg;
  try {
    cfg = load_config(config_path);
    apply_overrides(cfg, ov);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kConfigError;
  }
  RunResult r;
  try {
    r = run_scenario(cfg);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == Errc::ConfigParse ? kConfigError : kSimError;
  } catch (const std::exception& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kSimError;
  }
  try {
    make_out_dir(out_dir);
    write_file(join(out_dir, cfg.trajectory_csv), trajectory_csv(cfg, r.trajectory));
    write_file(join(out_dir, cfg.path_svg), path_svg(r.scenario.certs, r.trajectory, path_frame(cfg, r.trajectory)));
    write_file(join(out_dir, cfg.metrics_json), metrics_json(r.scenario, r.audit, r.trajectory, r.metrics, r.runtime_s).dump(2) + "\n");
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kIoError;
  }
  const auto& m = r.metrics;
  out << fmt::format("{}: {} samples, termination {}, min clearance {}{}\n", cfg.name, m.samples,
                     termination_name(m.termination), m.global_min ? fmt::format("{:.6g} m", *m.global_min) : "n/a",
                     m.first_crossing ? fmt::format(", first crossing at {:.6g} s", *m.first_crossing) : "");
  const bool finished = m.termination == Termination::Completed || m.termination == Termination::LeftWorkspace;
  if (!finished) err << "simulation stopped: " << r.trajectory.message << "\n";
  return finished ? kOk : kSimError;
}

inline int cmd_audit(const std::string& config_path, const Overrides& ov, std::ostream& out, std::ostream& err) {
  try {
    auto cfg = load_config(config_path);
    apply_overrides(cfg, ov);
    const auto s = build_scenario(cfg);
    out << audit_text(s, run_audits(s));
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == Errc::ConfigParse ? kConfigError : kOk;
  }
}

inline int cmd_basis_check(int n_u, int n_l, int samples, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  try {
    const auto b = make_positive_basis(n_u, n_l);
    const auto r = validate_positive_basis(b, samples, seed);
    out << fmt::format("n_u = {}, n_l = {}, c_a = {:.9g}\nmax |norm - 1| = {:.3g}\nmin singular value over n_u-subsets = {:.6g}\n"
                       "coverage failures: {} of {} random directions\n{}\n",
                       n_u, n_l, b.c_a, r.max_norm_deviation, r.min_subset_sv, r.coverage_failures, r.samples,
                       r.ok() ? "valid positive basis" : "INVALID");
    return r.ok() ? kOk : kCheckFailed;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kConfigError;
  }
}

struct ExampleOneSummary {
  double distance = 0;
  double max_slope = 0;
  double bound = 0;  ///< D / (1 - D)
  double value_at_minus_one = 0;
  double closed_form_max_error = 0;
  int slope_grid = 0;
};

inline Vec xy(double a, double b) { return (Vec(2) << a, b).finished(); }

/// Axis slice of the unreshaped filter: measured slope and closed-form agreement.
inline ExampleOneSummary example_one(double d, int slope_grid = 300000) {
  ExampleOneSummary s;
  s.distance = d;
  s.bound = d / (1 - d);
  s.slope_grid = slope_grid;
  const auto f = [d](double x) { return two_disc::rho_c(xy(x, 0), d)(0); };
  s.max_slope = two_disc::max_secant_slope(f, -2.5, 0.5, slope_grid);
  s.value_at_minus_one = f(-1.0);
  for (int i = 0; i <= 3000; ++i) {
    const double x = -2.5 + 3.0 * i / 3000;
    s.closed_form_max_error = std::max(s.closed_form_max_error, std::abs(f(x) - two_disc::rho_c_axis_closed_form(x, d)));
  }
  return s;
}

inline int cmd_example1(const std::string& out_dir, double d, std::ostream& out, std::ostream& err) {
  if (!(d > 0 && d < 1)) {
    err << "--distance must lie in (0, 1)\n";
    return kConfigError;
  }
  try {
    make_out_dir(out_dir);
    std::string field = "x_0,x_1,rho_c_norm\n";
    const Vec up = xy(0, 1), down = xy(0, -1);
    for (int i = 0; i <= 120; ++i)
      for (int j = 0; j <= 120; ++j) {
        const Vec x = xy(-2.5 + 3.0 * i / 120, -1.5 + 3.0 * j / 120);
        if ((x - up).norm() < d || (x - down).norm() < d) continue;
        field += fmt::format("{:.9g},{:.9g},{:.9g}\n", x(0), x(1), two_disc::rho_c(x, d).norm());
      }
    write_file(join(out_dir, "field.csv"), field);

    Series measured{"rho_c, first component", "#1f4e9a", {}, {}}, closed{"closed form", "#c0392b", {}, {}};
    std::string slice = "x_0,rho_c_0,closed_form\n";
    for (int i = 0; i <= 3000; ++i) {
      const double x = -2.5 + 3.0 * i / 3000;
      const double v = two_disc::rho_c(xy(x, 0), d)(0), c = two_disc::rho_c_axis_closed_form(x, d);
      slice += fmt::format("{:.9g},{:.9g},{:.9g}\n", x, v, c);
      measured.x.push_back(x);
      measured.y.push_back(v);
      closed.x.push_back(x);
      closed.y.push_back(c);
    }
    write_file(join(out_dir, "slice.csv"), slice);
    write_file(join(out_dir, "slice.svg"), line_plot_svg({measured, closed}, fmt::format("two discs, D = {}: unreshaped filter on the x-axis", d)));

    const auto s = example_one(d);
    nlohmann::ordered_json j{{"distance", d},
                             {"max_slope", s.max_slope},
                             {"slope_grid", s.slope_grid},
                             {"bound", s.bound},
                             {"slope_reaches_bound", s.max_slope >= s.bound},
                             {"value_at_minus_one", s.value_at_minus_one},
                             {"closed_form_max_error", s.closed_form_max_error}};
    write_file(join(out_dir, "example1.json"), j.dump(2) + "\n");
    out << fmt::format("D = {}: max slope {:.6f} on {} steps, D/(1-D) = {:.6f}; rho_c(-1, 0) = {:.9g}\n", d, s.max_slope,
                       s.slope_grid, s.bound, s.value_at_minus_one);
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == Errc::Io ? kIoError : kSimError;
  }
}

struct ExampleTwoSummary {
  double distance = 0;
  double c_a = 0;
  double closed_form_max_error = 0;
  int closed_form_points = 0;
  double slope_k0 = 0, slope_k1 = 0;              ///< fine grid
  double slope_k0_coarse = 0, slope_k1_coarse = 0;
  int containment_points = 0;
  int containment_samples = 0;
  int containment_violations = 0;
  int selection_outside = 0;
};

/// Reshaped filter with the pentagon basis: closed form, slopes for k_phi in {0, 1} and a
/// Monte-Carlo containment check of U_L in U_c at `points` random states.
inline ExampleTwoSummary example_two(double d, std::uint64_t seed, int points = 50, int per_point = 200) {
  ExampleTwoSummary s;
  s.distance = d;
  const auto basis = make_positive_basis(2, 5);
  s.c_a = basis.c_a;
  for (int i = 0; i <= 4000; ++i) {
    const double x1 = -3.0 + 4.0 * i / 4000;
    const double cf = two_disc::rho_l_axis_closed_form(x1, d, basis.c_a);
    if (!(cf < 1.0 - 1e-9) || (xy(x1, 0) - xy(0, 1)).norm() < d) continue;
    const Vec r = two_disc::rho_l(xy(x1, 0), d, basis, 0.0);
    s.closed_form_max_error = std::max({s.closed_form_max_error, std::abs(r(0) - cf), std::abs(r(1))});
    ++s.closed_form_points;
  }
  auto slope = [&](double k, int n) {
    return two_disc::max_secant_slope([&](double x) { return two_disc::rho_l(xy(x, 0), d, basis, k)(0); }, -3.0, 1.0, n);
  };
  s.slope_k0 = slope(0.0, 40000);
  s.slope_k1 = slope(1.0, 40000);
  s.slope_k0_coarse = slope(0.0, 4000);
  s.slope_k1_coarse = slope(1.0, 4000);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-3.0, 1.0), uy(-1.5, 1.5);
  while (s.containment_points < points) {
    const Vec x = xy(ux(rng), uy(rng));
    if ((x - xy(0, 1)).norm() <= d + 1e-3 || (x - xy(0, -1)).norm() <= d + 1e-3) continue;
    const auto cs = two_disc::constraints(x, d);
    const Vec sel = lipschitz_selection(cs);
    for (double k : {0.0, 1.0}) {
      const auto set = reshape_b_l(sel, cs, basis, k);
      if (((basis.a_l * sel - set.b_l).array() > 1e-9).any()) ++s.selection_outside;
      for (const auto& p : sample_polygon(basis.a_l, set.b_l, per_point, rng)) {
        ++s.containment_samples;
        if (!in_feasible_set(cs, p, 1e-9)) ++s.containment_violations;
      }
    }
    ++s.containment_points;
  }
  return s;
}

inline int cmd_example2(const std::string& out_dir, double d, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  if (!(d > 0 && d < 1)) {
    err << "--distance must lie in (0, 1)\n";
    return kConfigError;
  }
  try {
    make_out_dir(out_dir);
    const auto basis = make_positive_basis(2, 5);
    std::string field = "x_0,x_1,rho_l_norm_k0,rho_l_norm_k1\n";
    for (int i = 0; i <= 120; ++i)
      for (int j = 0; j <= 120; ++j) {
        const Vec x = xy(-3.0 + 4.0 * i / 120, -1.5 + 3.0 * j / 120);
        if ((x - xy(0, 1)).norm() < d || (x - xy(0, -1)).norm() < d) continue;
        field += fmt::format("{:.9g},{:.9g},{:.9g},{:.9g}\n", x(0), x(1), two_disc::rho_l(x, d, basis, 0.0).norm(),
                             two_disc::rho_l(x, d, basis, 1.0).norm());
      }
    write_file(join(out_dir, "field.csv"), field);

    Series k0{"rho_L, k_phi = 0", "#1f4e9a", {}, {}}, k1{"rho_L, k_phi = 1", "#2e8b57", {}, {}},
        cf{"closed form (binding part)", "#c0392b", {}, {}};
    std::string slice = "x_0,rho_l_0_k0,rho_l_0_k1,closed_form\n";
    for (int i = 0; i <= 2000; ++i) {
      const double x = -3.0 + 4.0 * i / 2000;
      const double a = two_disc::rho_l(xy(x, 0), d, basis, 0.0)(0), b = two_disc::rho_l(xy(x, 0), d, basis, 1.0)(0);
      const double c = two_disc::rho_l_axis_closed_form(x, d, basis.c_a);
      const bool binding = c < 1.0 - 1e-9;
      slice += fmt::format("{:.9g},{:.9g},{:.9g},{}\n", x, a, b, binding ? fmt::format("{:.9g}", c) : "");
      k0.x.push_back(x);
      k0.y.push_back(a);
      k1.x.push_back(x);
      k1.y.push_back(b);
      cf.x.push_back(x);
      cf.y.push_back(binding ? c : std::numeric_limits<double>::quiet_NaN());
    }
    write_file(join(out_dir, "slice.csv"), slice);
    write_file(join(out_dir, "slice.svg"), line_plot_svg({k0, k1, cf}, fmt::format("two discs, D = {}: reshaped filter on the x-axis", d)));

    const auto s = example_two(d, seed);
    nlohmann::ordered_json j{{"distance", d},
                             {"n_l", 5},
                             {"c_a", s.c_a},
                             {"closed_form_max_error", s.closed_form_max_error},
                             {"closed_form_points", s.closed_form_points},
                             {"slope_k_phi_0", s.slope_k0},
                             {"slope_k_phi_1", s.slope_k1},
                             {"slope_k_phi_0_coarse", s.slope_k0_coarse},
                             {"slope_k_phi_1_coarse", s.slope_k1_coarse},
                             {"containment_points", s.containment_points},
                             {"containment_samples", s.containment_samples},
                             {"containment_violations", s.containment_violations},
                             {"selection_outside", s.selection_outside}};
    write_file(join(out_dir, "example2.json"), j.dump(2) + "\n");
    out << fmt::format("D = {}: closed-form error {:.3g} over {} points; slopes {:.6f} (k_phi = 0), {:.6f} (k_phi = 1); "
                       "{} of {} sampled U_L points outside U_c\n",
                       d, s.closed_form_max_error, s.closed_form_points, s.slope_k0, s.slope_k1, s.containment_violations,
                       s.containment_samples);
    return kOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return e.code() == Errc::Io ? kIoError : kSimError;
  }
}

}  // namespace csc::app

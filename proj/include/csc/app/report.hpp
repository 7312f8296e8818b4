#pragma once

// Audits of a scenario and the metrics.json document.

#include "csc/app/config.hpp"
#include "csc/qcqp_safety.hpp"
#include "csc/reshaping.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <string>

namespace csc::app {

inline constexpr const char* kMetricsSchemaVersion = "1.0.0";

struct AuditReport {
  GainLedger ledger;
  std::vector<LevelMargin> margins;
  SmallGainReport small_gain;
  BasisReport basis;
  double c_a = 0;
  long n_l = 0;
  DisjointnessReport disjointness;
  std::vector<SuperlevelRateReport> superlevel;  ///< per certificate
  double feasibility_rate_residual = 0;
};

inline AuditReport run_audits(const Scenario& s, int basis_samples = 1000, int disjoint_samples = 10000) {
  AuditReport r;
  r.ledger = gain_ledger(s.gains);
  r.margins = k_selection_audit(s.gains);
  r.small_gain = small_gain_audit(s.gains);
  r.basis = validate_positive_basis(s.layer.basis, basis_samples, s.cfg.seed);
  r.c_a = s.layer.basis.c_a;
  r.n_l = s.layer.basis.a_l.rows();
  const auto [lo, hi] = scan_box(s.cfg);
  r.disjointness = disjointness_audit(s.certs, lo, hi, disjoint_samples);
  for (std::size_t j = 0; j < s.certs.size(); ++j) {
    SuperlevelRateInput in;
    in.c_j = s.cfg.threshold;
    in.v_j = s.cfg.level;
    in.v_max = s.certs[j].mu.f(-s.certs[j].safe_distance);  // largest V outside the obstacle core
    in.theta = s.cfg.theta;
    // the tracking error x~_2 enters the first level as the disturbance w, with gain gamma_12
    if (s.gains.m > 1) in.gamma_w_inv = [g = s.gains.gamma_12_slope](double v) { return v / g; };
    r.superlevel.push_back(superlevel_rate_audit(alpha_j(s.layer.rates, s.certs, j), s.layer.bounds, in));
  }
  r.feasibility_rate_residual = feasibility_rate_residual(s.layer.rates, s.layer.bounds);
  return r;
}

namespace detail {

inline nlohmann::ordered_json num_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

template <class T>
nlohmann::ordered_json opt_or_null(const std::optional<T>& v) {
  if (!v) return nullptr;
  return num_or_null(*v);
}

}  // namespace detail

inline nlohmann::ordered_json audit_json(const AuditReport& a) {
  using nlohmann::ordered_json;
  using detail::num_or_null;
  ordered_json j;
  ordered_json kbar = ordered_json::array();
  for (int p = 1; p <= a.ledger.m; ++p) {
    ordered_json row = ordered_json::array();
    for (int i = 1; i <= a.ledger.m; ++i) row.push_back(a.ledger.kbar(p, i));
    kbar.push_back(row);
  }
  j["kbar"] = kbar;
  ordered_json margins = ordered_json::array();
  for (const auto& m : a.margins)
    margins.push_back({{"level", m.level}, {"k", m.k}, {"required", m.rhs}, {"margin", m.margin()}});
  j["level_margins"] = margins;
  ordered_json checks = ordered_json::array();
  for (const auto& c : a.small_gain.checks) checks.push_back({{"name", c.name}, {"slope", c.slope}, {"pass", c.pass}});
  j["small_gain"] = {{"all_pass", a.small_gain.all_pass()}, {"checks", checks}};
  j["basis"] = {{"n_l", a.n_l},
                {"c_a", a.c_a},
                {"samples", a.basis.samples},
                {"max_norm_deviation", a.basis.max_norm_deviation},
                {"min_subset_singular_value", num_or_null(a.basis.min_subset_sv)},
                {"coverage_failures", a.basis.coverage_failures},
                {"ok", a.basis.ok()}};
  ordered_json first = nullptr;
  if (!a.disjointness.joint.empty()) {
    const auto& s = a.disjointness.joint.front();
    first = {{"x", {s.x(0), s.x(1)}}, {"j", s.j}, {"k", s.k}};
  }
  j["disjointness"] = {{"samples", a.disjointness.samples},
                       {"joint_samples", a.disjointness.joint.size()},
                       {"first_joint", first},
                       {"superlevel_samples", a.disjointness.superlevel_samples},
                       {"singular_samples", a.disjointness.singular_samples},
                       {"disjoint", a.disjointness.joint.empty()}};
  ordered_json sl = ordered_json::array();
  for (const auto& r : a.superlevel)
    sl.push_back({{"min_margin", num_or_null(r.min_margin)}, {"worst_v", num_or_null(r.worst_v)}, {"pass", r.pass}});
  j["superlevel_rate"] = sl;
  j["feasibility_rate_residual"] = a.feasibility_rate_residual;
  return j;
}

inline std::string hash_string(std::uint64_t h) { return fmt::format("fnv1a64:{:016x}", h); }

/// Hash of the config text plus the effective overrides.
inline std::string scenario_hash(const ScenarioConfig& c) {
  return hash_string(fnv1a(c.source + fmt::format("\n#dt={:.17g} horizon={:.17g} seed={}", c.dt, c.horizon, c.seed)));
}

inline nlohmann::ordered_json metrics_json(const Scenario& s, const AuditReport& a, const Trajectory& tr,
                                           const TrajectoryMetrics& m, double runtime_s) {
  using nlohmann::ordered_json;
  using detail::num_or_null;
  ordered_json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["scenario"] = {{"name", s.cfg.name},
                   {"hash", scenario_hash(s.cfg)},
                   {"plant", s.cfg.plant},
                   {"obstacles", s.certs.size()},
                   {"dt_s", s.cfg.dt},
                   {"horizon_s", s.cfg.horizon},
                   {"seed", s.cfg.seed},
                   {"gains_per_s", s.cfg.gains},
                   {"k1", s.gains.k1},
                   {"k1_estimated", s.k1_estimated}};
  j["audit"] = audit_json(a);
  ordered_json per = ordered_json::array();
  for (double v : m.min_clearance) per.push_back(num_or_null(v));
  j["trajectory"] = {{"min_clearance_m", detail::opt_or_null(m.global_min)},
                     {"min_clearance_per_certificate_m", per},
                     {"time_below_zero_s", m.time_below_zero},
                     {"first_crossing_s", detail::opt_or_null(m.first_crossing)},
                     {"max_xs2", num_or_null(m.max_xs2)},
                     {"max_u", num_or_null(m.max_u)},
                     {"termination", termination_name(m.termination)},
                     {"message", tr.message.empty() ? ordered_json(nullptr) : ordered_json(tr.message)},
                     {"samples", m.samples},
                     {"final_time_s", m.final_time}};
  j["runtime_s"] = runtime_s;
  return j;
}

/// Plain-text audit for the terminal.
inline std::string audit_text(const Scenario& s, const AuditReport& a) {
  std::string o;
  o += fmt::format("scenario {}  ({})\n", s.cfg.name, scenario_hash(s.cfg));
  o += fmt::format("k1 = {:.6g}{}\n\ngain ledger kbar(p, i):\n", s.gains.k1, s.k1_estimated ? " (grid estimate)" : "");
  o += "  p\\i";
  for (int i = 1; i <= a.ledger.m; ++i) o += fmt::format(" {:>14d}", i);
  o += "\n";
  for (int p = 1; p <= a.ledger.m; ++p) {
    o += fmt::format("  {:>3d}", p);
    for (int i = 1; i <= a.ledger.m; ++i) o += fmt::format(" {:>14.6g}", a.ledger.kbar(p, i));
    o += "\n";
  }
  o += "\nK-selection margins (K_i minus required slope):\n";
  if (a.margins.empty()) o += "  none (m = 1)\n";
  for (const auto& m : a.margins)
    o += fmt::format("  level {}: K = {:.6g}, required = {:.9g}, margin = {:.9g}  {}\n", m.level, m.k, m.rhs, m.margin(),
                     m.margin() > 0 ? "positive" : "NEGATIVE");
  o += "\nsmall-gain checks:\n";
  for (const auto& c : a.small_gain.checks)
    o += fmt::format("  {:<28} slope {:.6g}  {}\n", c.name, c.slope, c.pass ? "pass" : "FAIL");
  o += fmt::format("\npositive basis: n_l = {}, c_a = {:.9g}, coverage failures {}/{}, min subset sv {:.6g}  {}\n",
                   a.n_l, a.c_a, a.basis.coverage_failures, a.basis.samples, a.basis.min_subset_sv,
                   a.basis.ok() ? "valid" : "INVALID");
  o += fmt::format("\ndisjointness: {} grid samples, {} in some unsafe superlevel set, {} in two at once{}\n",
                   a.disjointness.samples, a.disjointness.superlevel_samples, a.disjointness.joint.size(),
                   a.disjointness.joint.empty() ? "" : "  VIOLATION");
  if (!a.disjointness.joint.empty()) {
    const auto& f = a.disjointness.joint.front();
    o += fmt::format("  first overlap at ({:.4g}, {:.4g}) between certificates {} and {}\n", f.x(0), f.x(1), f.j, f.k);
  }
  for (std::size_t j = 0; j < a.superlevel.size(); ++j)
    o += fmt::format("superlevel rate, certificate {}: min margin {:.6g}  {}\n", j, a.superlevel[j].min_margin,
                     a.superlevel[j].pass ? "pass" : "FAIL");
  o += fmt::format("feasibility rate residual: {:.6g}  {}\n", a.feasibility_rate_residual,
                   a.feasibility_rate_residual <= 1e-12 ? "pass" : "FAIL");
  return o;
}

}  // namespace csc::app

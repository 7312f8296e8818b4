#pragma once

// Scenario files: YAML with unit-suffixed keys, unknown keys rejected. A parsed config
// becomes a Scenario (certificates, safety layer, gains, plant, initial state).

#include "csc/cascade.hpp"
#include "csc/certificates.hpp"
#include "csc/sim.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace csc::app {

struct ObstacleConfig {
  std::string kind;  ///< "segment" or "disc"
  Vec a, b;          ///< segment end points, m
  Vec center;        ///< m
  double radius = 0; ///< m
  double safe_distance = 0.35;  ///< D_s, m
};

struct ScenarioConfig {
  std::string name = "scenario";

  std::string plant = "integrator_chain";  ///< integrator_chain | vtol_nonlinear | velocity_loop
  int order = 4;
  double gravity = 9.81;     ///< m/s^2
  double thrust_tol = 1e-6;  ///< m/s^2

  std::vector<ObstacleConfig> obstacles;

  double level = 1.0;      ///< v_j
  double threshold = 1.4;  ///< c_j
  double k_alpha = 1.0;    ///< 1/s

  Vec nominal;  ///< m/s
  std::string nominal_preset;

  int n_l = 11;
  double k_phi = 2.0;
  std::optional<double> c_a;

  std::vector<double> gains;  ///< K_2..K_m, 1/s
  double tau = 1.001;
  double theta = 1e-3;
  double gamma_12_slope = 4.0;
  double gamma_x2v_slope = 0.25;
  std::optional<double> k1 = 3.49;  ///< empty: estimate on the workspace grid
  int k1_grid = 200;

  double dt = 1e-3;       ///< s
  double horizon = 10.0;  ///< s
  Vec x0;                 ///< m
  Vec workspace_lo, workspace_hi;  ///< m
  int substeps = 0;
  std::uint64_t seed = 1;

  std::string trajectory_csv = "trajectory.csv";
  std::string path_svg = "path.svg";
  std::string metrics_json = "metrics.json";

  std::string source;  ///< raw file text, for hashing
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& where, const std::string& what) {
  throw Error(Errc::ConfigParse, where + ": " + what);
}

inline void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
  if (!n.IsMap()) config_error(where, "expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) config_error(where, "unknown key '" + key + "'");
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& where) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    config_error(where, "bad value");
  }
}

inline Vec vec2(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence() || n.size() != 2) config_error(where, "expected a list of two numbers");
  Vec v(2);
  v << scalar<double>(n[0], where), scalar<double>(n[1], where);
  return v;
}

template <class T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& where) {
  if (const auto n = parent[key]) out = scalar<T>(n, where + "." + key);
}

inline double positive(double v, const std::string& where) {
  if (!(v > 0) || !std::isfinite(v)) config_error(where, "must be positive and finite");
  return v;
}

}  // namespace detail

inline ScenarioConfig parse_config(const std::string& text) {
  using namespace detail;
  ScenarioConfig c;
  c.source = text;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    config_error("config", e.what());
  }
  check_keys(root, "config", {"name", "plant", "obstacles", "certificates", "nominal", "reshaping", "cascade", "sim", "outputs"});
  read(root, "name", c.name, "config");

  if (const auto p = root["plant"]) {
    check_keys(p, "plant", {"kind", "order", "gravity_mps2", "thrust_tol_mps2"});
    read(p, "kind", c.plant, "plant");
    read(p, "order", c.order, "plant");
    read(p, "gravity_mps2", c.gravity, "plant");
    read(p, "thrust_tol_mps2", c.thrust_tol, "plant");
  }
  if (c.plant != "integrator_chain" && c.plant != "vtol_nonlinear" && c.plant != "velocity_loop")
    config_error("plant.kind", "expected integrator_chain, vtol_nonlinear or velocity_loop");

  if (const auto obs = root["obstacles"]) {
    if (!obs.IsSequence()) config_error("obstacles", "expected a list");
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const std::string w = "obstacles[" + std::to_string(i) + "]";
      const auto o = obs[i];
      check_keys(o, w, {"segment", "disc", "safe_distance_m"});
      ObstacleConfig oc;
      read(o, "safe_distance_m", oc.safe_distance, w);
      if (!(oc.safe_distance >= 0)) config_error(w + ".safe_distance_m", "must be nonnegative");
      if (o["segment"] && o["disc"]) config_error(w, "give either segment or disc");
      if (const auto s = o["segment"]) {
        check_keys(s, w + ".segment", {"a_m", "b_m"});
        oc.kind = "segment";
        oc.a = vec2(s["a_m"], w + ".segment.a_m");
        oc.b = vec2(s["b_m"], w + ".segment.b_m");
      } else if (const auto d = o["disc"]) {
        check_keys(d, w + ".disc", {"center_m", "radius_m"});
        oc.kind = "disc";
        oc.center = vec2(d["center_m"], w + ".disc.center_m");
        oc.radius = scalar<double>(d["radius_m"], w + ".disc.radius_m");
        if (!(oc.radius >= 0)) config_error(w + ".disc.radius_m", "must be nonnegative");
      } else {
        config_error(w, "missing segment or disc");
      }
      c.obstacles.push_back(oc);
    }
  }

  if (const auto cert = root["certificates"]) {
    check_keys(cert, "certificates", {"level", "threshold", "k_alpha_per_s"});
    read(cert, "level", c.level, "certificates");
    read(cert, "threshold", c.threshold, "certificates");
    read(cert, "k_alpha_per_s", c.k_alpha, "certificates");
  }
  if (c.level != 1.0) config_error("certificates.level", "only v_j = 1 is supported by the exponential transform");
  positive(c.k_alpha, "certificates.k_alpha_per_s");

  if (const auto n = root["nominal"]) {
    check_keys(n, "nominal", {"velocity_mps", "preset"});
    if (n["velocity_mps"] && n["preset"]) config_error("nominal", "give either velocity_mps or preset");
    if (const auto v = n["velocity_mps"]) c.nominal = vec2(v, "nominal.velocity_mps");
    read(n, "preset", c.nominal_preset, "nominal");
  }
  if (!c.nominal_preset.empty()) {
    if (c.nominal_preset == "obstacle_course") c.nominal = (Vec(2) << 0.6, 1.0).finished();
    else if (c.nominal_preset == "east") c.nominal = (Vec(2) << 1.0, 0.0).finished();
    else config_error("nominal.preset", "expected obstacle_course or east");
  }
  if (c.nominal.size() == 0) config_error("nominal", "missing");

  if (const auto r = root["reshaping"]) {
    check_keys(r, "reshaping", {"n_l", "k_phi", "c_a"});
    read(r, "n_l", c.n_l, "reshaping");
    read(r, "k_phi", c.k_phi, "reshaping");
    if (const auto ca = r["c_a"]; ca && !ca.IsNull()) c.c_a = scalar<double>(ca, "reshaping.c_a");
  }
  if (!(c.k_phi >= 0)) config_error("reshaping.k_phi", "must be nonnegative");

  if (const auto g = root["cascade"]) {
    check_keys(g, "cascade", {"gains_per_s", "tau", "theta", "gamma_12_slope", "gamma_x2v_slope", "k1", "k1_grid"});
    if (const auto k = g["gains_per_s"]) {
      if (!k.IsSequence()) config_error("cascade.gains_per_s", "expected a list");
      for (std::size_t i = 0; i < k.size(); ++i)
        c.gains.push_back(positive(scalar<double>(k[i], "cascade.gains_per_s"), "cascade.gains_per_s"));
    }
    read(g, "tau", c.tau, "cascade");
    read(g, "theta", c.theta, "cascade");
    read(g, "gamma_12_slope", c.gamma_12_slope, "cascade");
    read(g, "gamma_x2v_slope", c.gamma_x2v_slope, "cascade");
    read(g, "k1_grid", c.k1_grid, "cascade");
    if (const auto k1 = g["k1"]) {
      if (k1.IsScalar() && k1.Scalar() == "estimate") c.k1.reset();
      else c.k1 = positive(scalar<double>(k1, "cascade.k1"), "cascade.k1");
    }
  }
  positive(c.theta, "cascade.theta");
  positive(c.tau, "cascade.tau");
  if (c.k1_grid < 2) config_error("cascade.k1_grid", "must be at least 2");

  if (const auto s = root["sim"]) {
    check_keys(s, "sim", {"dt_s", "horizon_s", "x0_m", "workspace", "substeps", "seed"});
    read(s, "dt_s", c.dt, "sim");
    read(s, "horizon_s", c.horizon, "sim");
    read(s, "substeps", c.substeps, "sim");
    read(s, "seed", c.seed, "sim");
    if (const auto x = s["x0_m"]) c.x0 = vec2(x, "sim.x0_m");
    if (const auto w = s["workspace"]) {
      check_keys(w, "sim.workspace", {"lo_m", "hi_m"});
      c.workspace_lo = vec2(w["lo_m"], "sim.workspace.lo_m");
      c.workspace_hi = vec2(w["hi_m"], "sim.workspace.hi_m");
      if (!((c.workspace_hi.array() > c.workspace_lo.array()).all())) config_error("sim.workspace", "hi must exceed lo");
    }
  }
  positive(c.dt, "sim.dt_s");
  if (!(c.horizon >= 0)) config_error("sim.horizon_s", "must be nonnegative");
  if (c.x0.size() == 0) config_error("sim.x0_m", "missing");
  if (c.substeps < 0) config_error("sim.substeps", "must be nonnegative");

  if (const auto o = root["outputs"]) {
    check_keys(o, "outputs", {"trajectory_csv", "path_svg", "metrics_json"});
    read(o, "trajectory_csv", c.trajectory_csv, "outputs");
    read(o, "path_svg", c.path_svg, "outputs");
    read(o, "metrics_json", c.metrics_json, "outputs");
  }

  if (c.plant == "integrator_chain" && (c.order < 1 || static_cast<int>(c.gains.size()) != c.order - 1))
    config_error("cascade.gains_per_s", "an order-m chain needs m - 1 gains");
  if (c.plant == "vtol_nonlinear" && c.gains.size() != 3) config_error("cascade.gains_per_s", "the VTOL needs 3 gains");
  if (c.plant == "velocity_loop" && !c.gains.empty())
    config_error("cascade.gains_per_s", "the velocity loop takes the filter output directly; give no gains");
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigParse, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

struct Scenario {
  ScenarioConfig cfg;
  std::vector<CertificateSpec> certs;
  SafetyLayer layer;
  CascadeGains gains;
  PlantModel plant;
  Vec x0;  ///< full plant state
  SimOptions opt;
  bool k1_estimated = false;
};

inline std::vector<CertificateSpec> make_certificates(const ScenarioConfig& c) {
  std::vector<CertificateSpec> out;
  for (const auto& o : c.obstacles) {
    CertificateSpec s;
    if (o.kind == "segment") s.geometry = Segment{o.a, o.b};
    else s.geometry = Disc{o.center, o.radius};
    s.safe_distance = o.safe_distance;
    s.level = c.level;
    out.push_back(s);
  }
  return out;
}

/// Box used for grid scans: the workspace if given, else obstacles and x0 padded by 1 m.
inline std::pair<Vec, Vec> scan_box(const ScenarioConfig& c) {
  if (c.workspace_lo.size() == 2) return {c.workspace_lo, c.workspace_hi};
  Vec lo = c.x0, hi = c.x0;
  for (const auto& o : c.obstacles) {
    for (const Vec& p : o.kind == "segment" ? std::vector<Vec>{o.a, o.b} : std::vector<Vec>{o.center}) {
      const double r = (o.kind == "disc" ? o.radius : 0.0) + o.safe_distance;
      lo = lo.cwiseMin((p.array() - r).matrix());
      hi = hi.cwiseMax((p.array() + r).matrix());
    }
  }
  return {(lo.array() - 1.0).matrix(), (hi.array() + 1.0).matrix()};
}

/// Lipschitz estimate of the filter over the safe part of the scan box.
inline double estimate_k1(const SafetyLayer& layer, const ScenarioConfig& c) {
  const auto [lo, hi] = scan_box(c);
  const auto safe = [&](const Vec& x) {
    for (const auto& cert : layer.certs)
      if (clearance(cert, x) < 0) return false;
    return true;
  };
  return estimate_lipschitz([&](const Vec& x) { return safety_filter(layer, x); }, lo, hi, c.k1_grid, safe);
}

inline Scenario build_scenario(const ScenarioConfig& c) {
  Scenario s;
  s.cfg = c;
  s.certs = make_certificates(c);
  try {
    auto basis = make_positive_basis(2, c.n_l);
    if (c.c_a) basis.c_a = *c.c_a;
    s.layer.basis = basis;
  } catch (const Error& e) {
    throw Error(Errc::ConfigParse, std::string("reshaping.n_l: ") + e.what());
  }
  s.layer.certs = s.certs;
  const Vec rho0 = c.nominal;
  s.layer.nominal = [rho0](const Vec&) { return rho0; };
  s.layer.k_phi = c.k_phi;
  s.layer.g = Mat::Identity(2, 2);
  s.layer.rates.base_slope = c.k_alpha;

  s.gains.m = static_cast<int>(c.gains.size()) + 1;
  s.gains.tracking_slopes = c.gains;
  s.gains.tau = c.tau;
  s.gains.theta = c.theta;
  s.gains.k_alpha = c.k_alpha;
  s.gains.gamma_12_slope = c.gamma_12_slope;
  s.gains.gamma_x2v_slope = c.gamma_x2v_slope;
  s.gains.rho0_bound = rho0.norm();
  if (c.k1) {
    s.gains.k1 = *c.k1;
  } else {
    s.gains.k1 = estimate_k1(s.layer, c);
    s.k1_estimated = true;
  }

  if (c.plant == "integrator_chain") {
    s.plant = IntegratorChain{c.order, 2};
    s.x0 = Vec::Zero(2 * c.order);
    s.x0.head(2) = c.x0;
  } else if (c.plant == "vtol_nonlinear") {
    s.plant = VtolNonlinear{c.gravity, c.thrust_tol};
    s.x0 = Vec::Zero(8);
    s.x0.head(2) = c.x0;
    s.x0(6) = c.gravity;  // hover
  } else {
    s.plant = VelocityLoop::identified();
    s.x0 = Vec::Zero(8);
    s.x0.head(2) = c.x0;
  }
  s.opt.dt = c.dt;
  s.opt.horizon = c.horizon;
  s.opt.workspace_lo = c.workspace_lo;
  s.opt.workspace_hi = c.workspace_hi;
  s.opt.substeps = c.substeps;
  return s;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace csc::app

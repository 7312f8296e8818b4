#pragma once

// CSV and SVG output. All numbers go through fmt so the bytes depend only on the values.

#include "csc/app/config.hpp"
#include "csc/sim.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace csc::app {

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(Errc::Io, "write to " + path + " failed");
}

inline std::vector<std::string> state_columns(const ScenarioConfig& c, Eigen::Index n) {
  if (c.plant == "vtol_nonlinear") return {"p_0", "p_1", "dp_0", "dp_1", "theta", "dtheta", "a1", "da1"};
  std::vector<std::string> out;
  for (Eigen::Index k = 0; k < n; ++k) out.push_back(fmt::format("x{}_{}", k / 2 + 1, k % 2));
  return out;
}

/// t, state, u, h_j, V_j, x*_2 with 9 significant digits.
inline std::string trajectory_csv(const ScenarioConfig& c, const Trajectory& tr) {
  std::string o = "t";
  if (tr.size() == 0) return o + "\n";
  for (const auto& s : state_columns(c, tr.states.front().size())) o += "," + s;
  for (Eigen::Index k = 0; k < tr.inputs.front().size(); ++k) o += fmt::format(",u_{}", k);
  const Eigen::Index nc = tr.h.front().size();
  for (Eigen::Index k = 0; k < nc; ++k) o += fmt::format(",h_{}", k);
  for (Eigen::Index k = 0; k < nc; ++k) o += fmt::format(",V_{}", k);
  o += ",xs2_0,xs2_1\n";
  auto put = [&o](const Vec& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) o += fmt::format(",{:.9g}", v(k));
  };
  for (std::size_t i = 0; i < tr.size(); ++i) {
    o += fmt::format("{:.9g}", tr.times[i]);
    put(tr.states[i]);
    put(tr.inputs[i]);
    put(tr.h[i]);
    put(tr.v[i]);
    put(tr.refs[i].front());
    o += "\n";
  }
  return o;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, ',')) f.push_back(x);
    if (!l.empty() && l.back() == ',') f.emplace_back();
    return f;
  };
  if (!std::getline(in, line)) return t;
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(line)) row.push_back(f.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f));
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct SvgFrame {
  Vec lo, hi;  ///< world box, m
  double width_px = 800;
  double scale() const { return width_px / (hi(0) - lo(0)); }
  double height_px() const { return scale() * (hi(1) - lo(1)); }
};

namespace detail {

inline std::string g(double v) { return fmt::format("{:.6g}", v); }

}  // namespace detail

/// Obstacles with their D_s bands (round-capped strokes of width 2 D_s), the x_1 path and
/// start/end markers. Geometry is drawn in world units under a y-up transform.
inline std::string path_svg(const std::vector<CertificateSpec>& certs, const Trajectory& tr, const SvgFrame& f) {
  using detail::g;
  const double s = f.scale();
  std::string o = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<g transform=\"matrix({} 0 0 {} {} {})\">\n",
      g(f.width_px), g(f.height_px()), g(f.width_px), g(f.height_px()), g(s), g(-s), g(-f.lo(0) * s), g(f.hi(1) * s));
  for (const auto& c : certs) {
    if (const auto* seg = std::get_if<Segment>(&c.geometry)) {
      const auto line = fmt::format("x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"", g(seg->o1(0)), g(seg->o1(1)), g(seg->o2(0)),
                                    g(seg->o2(1)));
      o += fmt::format("<line {} stroke=\"#f3b0b0\" stroke-width=\"{}\" stroke-linecap=\"round\"/>\n", line,
                       g(2 * c.safe_distance));
      o += fmt::format("<line {} stroke=\"#a01818\" stroke-width=\"{}\" stroke-linecap=\"round\"/>\n", line, g(0.03));
    } else {
      const auto& d = std::get<Disc>(c.geometry);
      o += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#f3b0b0\"/>\n", g(d.center(0)), g(d.center(1)),
                       g(d.radius + c.safe_distance));
      o += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#a01818\"/>\n", g(d.center(0)), g(d.center(1)),
                       g(d.radius));
    }
  }
  if (tr.size() > 0) {
    const std::size_t stride = std::max<std::size_t>(1, tr.size() / 2000);
    o += "<polyline fill=\"none\" stroke=\"#1f4e9a\" stroke-width=\"0.03\" stroke-linejoin=\"round\" points=\"";
    for (std::size_t i = 0; i < tr.size(); i += stride) {
      if (i) o += " ";
      o += g(tr.states[i](0)) + "," + g(tr.states[i](1));
    }
    if ((tr.size() - 1) % stride != 0) o += " " + g(tr.states.back()(0)) + "," + g(tr.states.back()(1));
    o += "\"/>\n";
    o += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"0.06\" fill=\"#1f4e9a\"/>\n", g(tr.states.front()(0)),
                     g(tr.states.front()(1)));
    o += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"0.06\" fill=\"none\" stroke=\"#1f4e9a\" stroke-width=\"0.02\"/>\n",
                     g(tr.states.back()(0)), g(tr.states.back()(1)));
  }
  o += "</g>\n</svg>\n";
  return o;
}

/// World box for the path plot: the workspace, or obstacles plus path padded by 0.5 m.
inline SvgFrame path_frame(const ScenarioConfig& c, const Trajectory& tr) {
  if (c.workspace_lo.size() == 2) return {c.workspace_lo, c.workspace_hi};
  auto [lo, hi] = scan_box(c);
  for (const auto& s : tr.states) {
    lo = lo.cwiseMin(s.head(2));
    hi = hi.cwiseMax(s.head(2));
  }
  return {(lo.array() - 0.5).matrix(), (hi.array() + 0.5).matrix()};
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;  ///< NaN in y breaks the line
};

/// Line plot of several series on shared axes.
inline std::string line_plot_svg(const std::vector<Series>& series, const std::string& title) {
  using detail::g;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  const double w = 800, h = 400, pad = 40;
  auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (w - 2 * pad); };
  auto py = [&](double y) { return h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad); };
  std::string o = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{3}</text>\n"
      "<rect x=\"{2}\" y=\"{2}\" width=\"{4}\" height=\"{5}\" fill=\"none\" stroke=\"#888\"/>\n",
      g(w), g(h), g(pad), title, g(w - 2 * pad), g(h - 2 * pad));
  o += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">x: [{}, {}]  y: [{}, {}]</text>\n",
                   g(pad), g(h - 12), g(x0), g(x1), g(y0), g(y1));
  int k = 0;
  for (const auto& s : series) {
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        o += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", s.color, pts);
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      if (!pts.empty()) pts += " ";
      pts += g(px(s.x[i])) + "," + g(py(s.y[i]));
    }
    flush();
    o += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>\n",
                     g(w - 260), g(pad + 16 + 16 * k++), s.color, s.label);
  }
  o += "</svg>\n";
  return o;
}

}  // namespace csc::app

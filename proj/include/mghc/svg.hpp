#pragma once

// Minimal deterministic line-chart renderer: six stacked panels (genset P,
// Q, speed, torque; PV P/Q; first recorded bus P/Q).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "mghc/csv.hpp"
#include "mghc/errors.hpp"
#include "mghc/genset.hpp"

namespace mghc {

namespace svg_detail {

inline std::string num(double v, const char* fmt = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  return nice * mag;
}

struct Trace {
  std::string label;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::vector<Trace> traces;
};

}  // namespace svg_detail

inline std::string render_svg(const Timeseries& ts) {
  using namespace svg_detail;
  auto col = [&](std::string_view n) -> const std::vector<double>& {
    if (!ts.has(n)) throw InvalidArgument("plot needs column " + std::string(n));
    return ts.column(n);
  };
  std::string bus_p;
  std::string bus_q;
  for (const auto& n : ts.names) {
    if (n.starts_with("bus") && n.ends_with("_p_mw")) {
      bus_p = n;
      bus_q = n.substr(0, n.size() - 5) + "_q_mvar";
      break;
    }
  }
  if (bus_p.empty()) throw InvalidArgument("plot needs a bus power column");
  const std::string bus = bus_p.substr(3, bus_p.size() - 8);

  std::vector<double> hz = col(channel::kGenSpeed);
  for (double& v : hz) v *= kNominalHz;

  const std::vector<Panel> panels{
      {"Genset real power (MW)", {{"P", col(channel::kGenP)}}},
      {"Genset reactive power (Mvar)", {{"Q", col(channel::kGenQ)}}},
      {"Genset speed (Hz)", {{"speed", hz}}},
      {"Genset torque (pu)", {{"torque", col(channel::kGenTorque)}}},
      {"PV power", {{"P (MW)", col(channel::kPvP)}, {"Q (Mvar)", col(channel::kPvQ)}}},
      {"Bus " + bus + " power", {{"P (MW)", col(bus_p)}, {"Q (Mvar)", col(bus_q)}}},
  };

  constexpr double kWidth = 960.0;
  constexpr double kPanelH = 150.0;
  constexpr double kLeft = 80.0;
  constexpr double kRight = 130.0;
  constexpr double kTop = 28.0;
  constexpr double kGap = 22.0;
  const char* colors[] = {"#1f5fa8", "#c0392b"};
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kPanelH - kTop - kGap;
  const double height = kPanelH * static_cast<double>(panels.size()) + 30.0;

  double t0 = ts.time.empty() ? 0.0 : ts.time.front();
  double t1 = ts.time.empty() ? 1.0 : ts.time.back();
  if (!(t1 > t0)) t1 = t0 + 1.0;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth, "%.0f") +
         "\" height=\"" + num(height, "%.0f") + "\" viewBox=\"0 0 " + num(kWidth, "%.0f") + " " +
         num(height, "%.0f") + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const auto& p = panels[pi];
    const double y0 = kPanelH * static_cast<double>(pi) + kTop;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& tr : p.traces) {
      for (double v : tr.y) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-9 * std::max(1.0, std::abs(hi))) {
      const double pad = std::max(1e-3, 0.05 * std::abs(hi));
      lo -= pad;
      hi += pad;
    }
    const double step = nice_step(hi - lo, 4);
    lo = std::floor(lo / step) * step;
    hi = std::ceil(hi / step) * step;
    auto ymap = [&](double v) { return y0 + plot_h * (hi - v) / (hi - lo); };
    auto xmap = [&](double t) { return kLeft + plot_w * (t - t0) / (t1 - t0); };

    out += "<g>\n";
    out += "<text x=\"" + num(kLeft) + "\" y=\"" + num(y0 - 8.0) + "\" font-weight=\"bold\">" +
           escape(p.title) + "</text>\n";
    out += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(y0) + "\" width=\"" + num(plot_w) +
           "\" height=\"" + num(plot_h) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    const auto nticks = static_cast<int>(std::llround((hi - lo) / step));
    for (int k = 0; k <= nticks; ++k) {
      const double v = lo + step * k;
      const double y = ymap(v);
      out += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft + plot_w) +
             "\" y2=\"" + num(y) + "\" stroke=\"#ddd\"/>\n";
      out += "<text x=\"" + num(kLeft - 6.0) + "\" y=\"" + num(y + 4.0) +
             "\" text-anchor=\"end\">" + num(std::abs(v) < step * 1e-6 ? 0.0 : v, "%.6g") +
             "</text>\n";
    }
    const double tstep = nice_step(t1 - t0, 10);
    for (double t = std::ceil(t0 / tstep) * tstep; t <= t1 + 1e-9; t += tstep) {
      const double x = xmap(t);
      out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y0 + plot_h) + "\" x2=\"" + num(x) +
             "\" y2=\"" + num(y0 + plot_h + 4.0) + "\" stroke=\"#444\"/>\n";
      out += "<text x=\"" + num(x) + "\" y=\"" + num(y0 + plot_h + 15.0) +
             "\" text-anchor=\"middle\">" + num(t, "%.6g") + "</text>\n";
    }
    for (std::size_t ti = 0; ti < p.traces.size(); ++ti) {
      const auto& tr = p.traces[ti];
      std::string pts;
      auto flush = [&] {
        if (!pts.empty()) {
          out += "<polyline fill=\"none\" stroke=\"" + std::string(colors[ti % 2]) +
                 "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
        }
        pts.clear();
      };
      for (std::size_t i = 0; i < tr.y.size() && i < ts.time.size(); ++i) {
        if (!std::isfinite(tr.y[i])) {
          flush();
          continue;
        }
        if (!pts.empty()) pts += ' ';
        pts += num(xmap(ts.time[i])) + "," + num(ymap(tr.y[i]));
      }
      flush();
      if (p.traces.size() > 1) {
        const double ly = y0 + 12.0 + 16.0 * static_cast<double>(ti);
        out += "<line x1=\"" + num(kLeft + plot_w + 10.0) + "\" y1=\"" + num(ly - 4.0) +
               "\" x2=\"" + num(kLeft + plot_w + 28.0) + "\" y2=\"" + num(ly - 4.0) +
               "\" stroke=\"" + colors[ti % 2] + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + num(kLeft + plot_w + 32.0) + "\" y=\"" + num(ly) + "\">" +
               escape(tr.label) + "</text>\n";
      }
    }
    out += "</g>\n";
  }
  out += "<text x=\"" + num(kLeft + plot_w / 2.0) + "\" y=\"" + num(height - 6.0) +
         "\" text-anchor=\"middle\">time (s)</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace mghc

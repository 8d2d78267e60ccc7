#pragma once

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "contracate/eval/metrics.hpp"
#include "contracate/eval/sweep.hpp"

namespace contracate::eval {

/// 17 significant digits; parses back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Long format: variant,axis,seed,metric,value. Per-seed rows come first in
/// each cell, followed by "mean" and (with >= 2 seeds) "stderr" rows.
inline void write_long_csv(std::ostream& os, const SweepResult& r) {
  os << "variant,axis,seed,metric,value\n";
  for (const auto& row : r.cells) {
    for (const auto& c : row) {
      const std::string axis = format_real(c.axis_value);
      for (const auto& s : c.per_seed) {
        os << c.variant << ',' << axis << ',' << s.seed << ",mae," << format_real(s.mae) << '\n';
        os << c.variant << ',' << axis << ',' << s.seed << ",rmse," << format_real(s.rmse) << '\n';
        os << c.variant << ',' << axis << ',' << s.seed << ",pehe," << format_real(s.pehe) << '\n';
      }
      if (!c.report) continue;
      const auto& m = *c.report;
      os << c.variant << ',' << axis << ",mean,mae," << format_real(m.mae) << '\n';
      os << c.variant << ',' << axis << ",mean,rmse," << format_real(m.rmse) << '\n';
      os << c.variant << ',' << axis << ",mean,pehe," << format_real(m.pehe) << '\n';
      if (m.pehe_stderr) {
        os << c.variant << ',' << axis << ",stderr,mae," << format_real(*m.mae_stderr) << '\n';
        os << c.variant << ',' << axis << ",stderr,rmse," << format_real(*m.rmse_stderr) << '\n';
        os << c.variant << ',' << axis << ",stderr,pehe," << format_real(*m.pehe_stderr) << '\n';
      }
    }
  }
}

/// Same layout for a single report; `variant` labels the rows and the axis
/// column is empty.
inline void write_metrics_csv(std::ostream& os, const std::string& variant, const MetricsReport& m) {
  os << "variant,axis,seed,metric,value\n";
  for (const auto& s : m.per_seed) {
    os << variant << ",," << s.seed << ",mae," << format_real(s.mae) << '\n';
    os << variant << ",," << s.seed << ",rmse," << format_real(s.rmse) << '\n';
    os << variant << ",," << s.seed << ",pehe," << format_real(s.pehe) << '\n';
  }
  os << variant << ",,mean,mae," << format_real(m.mae) << '\n';
  os << variant << ",,mean,rmse," << format_real(m.rmse) << '\n';
  os << variant << ",,mean,pehe," << format_real(m.pehe) << '\n';
  if (m.pehe_stderr) {
    os << variant << ",,stderr,mae," << format_real(*m.mae_stderr) << '\n';
    os << variant << ",,stderr,rmse," << format_real(*m.rmse_stderr) << '\n';
    os << variant << ",,stderr,pehe," << format_real(*m.pehe_stderr) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["mae"] = m.mae;
  j["rmse"] = m.rmse;
  j["pehe"] = m.pehe;
  if (m.pehe_stderr) {
    j["mae_stderr"] = *m.mae_stderr;
    j["rmse_stderr"] = *m.rmse_stderr;
    j["pehe_stderr"] = *m.pehe_stderr;
  }
  auto& seeds = j["per_seed"] = nlohmann::ordered_json::array();
  for (const auto& s : m.per_seed) seeds.push_back({{"seed", s.seed}, {"mae", s.mae}, {"rmse", s.rmse}, {"pehe", s.pehe}});
  return j;
}

inline nlohmann::ordered_json to_json(const SweepResult& r) {
  nlohmann::ordered_json j;
  j["axis"] = r.axis_name;
  j["axis_values"] = r.axis_values;
  j["seeds"] = r.seeds;
  auto& variants = j["variants"] = nlohmann::ordered_json::object();
  for (std::size_t v = 0; v < r.variants.size(); ++v) {
    auto& points = variants[r.variants[v]] = nlohmann::ordered_json::array();
    for (const auto& c : r.cells[v]) {
      nlohmann::ordered_json p;
      p["axis_value"] = c.axis_value;
      if (c.report) {
        p["mae"] = c.report->mae;
        p["rmse"] = c.report->rmse;
        p["pehe"] = c.report->pehe;
        if (c.report->pehe_stderr) p["pehe_stderr"] = *c.report->pehe_stderr;
      } else {
        p["failed"] = true;
      }
      if (!c.failures.empty()) p["failures"] = c.failures;
      points.push_back(std::move(p));
    }
  }
  return j;
}

/// Line plot of mean PEHE against the sweep axis, one polyline per variant.
inline std::string sweep_svg(const SweepResult& r) {
  constexpr double W = 640, H = 400, L = 60, R = 140, T = 30, B = 50;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double xmin = r.axis_values.front(), xmax = r.axis_values.back();
  if (xmax == xmin) xmax = xmin + 1.0;
  double ymax = 0.0;
  for (const auto& row : r.cells)
    for (const auto& c : row)
      if (c.report) ymax = std::max(ymax, c.report->pehe);
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.1;
  auto px = [&](double v) { return L + (v - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double v) { return H - B - v / ymax * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
    << r.axis_name << "</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\">PEHE</text>\n";
  for (double v : r.axis_values) {
    s << "<text x=\"" << px(v) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << format_real(v).substr(0, 5) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    char label[32];
    std::snprintf(label, sizeof label, "%.3g", v);
    s << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << label
      << "</text>\n";
  }
  for (std::size_t v = 0; v < r.variants.size(); ++v) {
    const char* color = colors[v % 6];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" data-variant=\"" << r.variants[v]
      << "\" points=\"";
    bool first = true;
    for (const auto& c : r.cells[v]) {
      if (!c.report) continue;
      s << (first ? "" : " ") << px(c.axis_value) << ',' << py(c.report->pehe);
      first = false;
    }
    s << "\"/>\n";
    s << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (v + 1) << "\" font-size=\"12\" fill=\"" << color << "\">"
      << r.variants[v] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace contracate::eval

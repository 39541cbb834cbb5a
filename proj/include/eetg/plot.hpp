#pragma once

// Plain SVG output: per-type box plots of per-cell mean returns and the
// 4 x 20 archive fitness heatmap.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "eetg/bench.hpp"
#include "eetg/qd.hpp"
#include "eetg/stats.hpp"

namespace eetg {

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1"};
  return colors[i % 7];
}

// viridis-like ramp, t in [0, 1]
inline std::string ramp(double t) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(t));
  const double f = t - i;
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

}  // namespace svg

struct BoxPlotResult {
  std::string svg;
  std::vector<std::string> warnings;
};

// One group per environment type, one box per report inside it. Reports with
// no usable cell in a type are left out of that group with a warning.
inline BoxPlotResult box_plot_svg(const std::vector<EvalReport>& reports, const std::string& title = "") {
  BoxPlotResult out;
  const double W = 960, H = 420, left = 70, right = 180, top = 40, bottom = 50;
  const double plot_w = W - left - right, plot_h = H - top - bottom;

  std::vector<std::vector<std::vector<double>>> data(kNumEnvTypes, std::vector<std::vector<double>>(reports.size()));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t r = 0; r < reports.size(); ++r)
    for (int t = 0; t < kNumEnvTypes; ++t) {
      for (int v = 0; v < kNumVariations; ++v) {
        const CellResult& c = reports[r].cells[t * kNumVariations + v];
        if (!c.failed && std::isfinite(c.mean)) data[t][r].push_back(c.mean);
      }
      if (data[t][r].empty())
        out.warnings.push_back(std::string(variant_name(reports[r].variant)) + " has no results for " +
                               env_type_name(kEnvTypes[t]) + "; omitted");
      for (double x : data[t][r]) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
  if (!std::isfinite(lo)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto ypos = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    s << "<text x=\"" << svg::num(left) << "\" y=\"22\" font-size=\"15\">" << svg::escape(title) << "</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = lo + (hi - lo) * k / 5.0;
    const double y = ypos(v);
    s << "<line x1=\"" << svg::num(left) << "\" x2=\"" << svg::num(left + plot_w) << "\" y1=\"" << svg::num(y)
      << "\" y2=\"" << svg::num(y) << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << svg::num(left - 6) << "\" y=\"" << svg::num(y + 4) << "\" text-anchor=\"end\">"
      << svg::num(v) << "</text>\n";
  }
  s << "<text transform=\"translate(18," << svg::num(top + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << "mean return per cell</text>\n";

  const double group_w = plot_w / kNumEnvTypes;
  const double n = std::max<std::size_t>(1, reports.size());
  const double box_w = std::min(28.0, 0.8 * group_w / n);
  for (int t = 0; t < kNumEnvTypes; ++t) {
    const double gx = left + group_w * t;
    s << "<text x=\"" << svg::num(gx + group_w / 2) << "\" y=\"" << svg::num(H - bottom + 20)
      << "\" text-anchor=\"middle\">" << env_type_name(kEnvTypes[t]) << "</text>\n";
    for (std::size_t r = 0; r < reports.size(); ++r) {
      if (data[t][r].empty()) continue;
      const Summary q = summarize(data[t][r]);
      const double cx = gx + group_w * (0.1 + 0.8 * (r + 0.5) / n);
      const char* col = svg::palette(r);
      s << "<line x1=\"" << svg::num(cx) << "\" x2=\"" << svg::num(cx) << "\" y1=\"" << svg::num(ypos(q.min))
        << "\" y2=\"" << svg::num(ypos(q.max)) << "\" stroke=\"" << col << "\"/>\n";
      s << "<rect x=\"" << svg::num(cx - box_w / 2) << "\" y=\"" << svg::num(ypos(q.q3)) << "\" width=\""
        << svg::num(box_w) << "\" height=\"" << svg::num(std::max(0.5, ypos(q.q1) - ypos(q.q3))) << "\" fill=\"" << col
        << "\" fill-opacity=\"0.35\" stroke=\"" << col << "\"/>\n";
      s << "<line x1=\"" << svg::num(cx - box_w / 2) << "\" x2=\"" << svg::num(cx + box_w / 2) << "\" y1=\""
        << svg::num(ypos(q.median)) << "\" y2=\"" << svg::num(ypos(q.median)) << "\" stroke=\"" << col
        << "\" stroke-width=\"2\"/>\n";
    }
  }
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const double y = top + 10 + 20 * static_cast<double>(r);
    s << "<rect x=\"" << svg::num(W - right + 20) << "\" y=\"" << svg::num(y - 9) << "\" width=\"12\" height=\"12\" fill=\""
      << svg::palette(r) << "\"/>\n";
    s << "<text x=\"" << svg::num(W - right + 38) << "\" y=\"" << svg::num(y + 1) << "\">"
      << variant_name(reports[r].variant) << "</text>\n";
  }
  s << "</svg>\n";
  out.svg = s.str();
  return out;
}

// 4 rows (types) x 20 columns (variations); empty cells are drawn grey.
inline std::string archive_heatmap_svg(const Archive& a, const std::string& title = "") {
  const double cell = 30, left = 80, top = 40;
  const double W = left + cell * kNumVariations + 20, H = top + cell * kNumEnvTypes + 60;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& e : a.cells)
    if (e) {
      lo = std::min(lo, e->fitness);
      hi = std::max(hi, e->fitness);
    }
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << svg::num(left) << "\" y=\"22\" font-size=\"14\">"
    << svg::escape(title.empty() ? "archive fitness" : title) << " (coverage " << a.coverage() << "/" << kNumCells
    << ")</text>\n";
  for (int t = 0; t < kNumEnvTypes; ++t) {
    s << "<text x=\"" << svg::num(left - 6) << "\" y=\"" << svg::num(top + cell * t + cell / 2 + 4)
      << "\" text-anchor=\"end\">" << env_type_name(kEnvTypes[t]) << "</text>\n";
    for (int v = 0; v < kNumVariations; ++v) {
      const auto& e = a.cells[t * kNumVariations + v];
      std::string fill = "#cccccc";
      if (e) fill = svg::ramp(hi > lo ? (e->fitness - lo) / (hi - lo) : 1.0);
      s << "<rect class=\"cell\" x=\"" << svg::num(left + cell * v) << "\" y=\"" << svg::num(top + cell * t)
        << "\" width=\"" << svg::num(cell - 1) << "\" height=\"" << svg::num(cell - 1) << "\" fill=\"" << fill << "\">";
      s << "<title>" << env_type_name(kEnvTypes[t]) << ' ' << v << ": "
        << (e ? svg::num(e->fitness) : std::string("empty")) << "</title></rect>\n";
    }
  }
  for (int v = 0; v < kNumVariations; v += 5)
    s << "<text x=\"" << svg::num(left + cell * v + cell / 2) << "\" y=\"" << svg::num(top + cell * kNumEnvTypes + 14)
      << "\" text-anchor=\"middle\">" << v << "</text>\n";
  if (std::isfinite(lo))
    s << "<text x=\"" << svg::num(left) << "\" y=\"" << svg::num(H - 14) << "\">fitness " << svg::num(lo) << " to "
      << svg::num(hi) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace eetg

#pragma once

// Minimal self-contained SVG output: multi-series line plots and a
// categorical heat map. Output depends only on the data (no timestamps).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace nlgt::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
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

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

/// Line plot; with log_y, non-positive values are dropped.
inline void line_plot(std::ostream& os, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series, bool log_y = false) {
  const double W = 720, H = 420, L = 70, R = 150, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.y[k]) || (log_y && s.y[k] <= 0.0)) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    os << "<text x=\"" << px(fx) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
    const double yy = H - B - (fy - y0) / (y1 - y0) * (H - T - B);
    os << "<text x=\"" << L - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">"
       << (log_y ? "1e" + num(fy) : num(fy)) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(xlabel)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\">" << escape(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    os << "<polyline fill=\"none\" stroke=\"" << palette(i) << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
      if (!std::isfinite(s.y[k]) || (log_y && s.y[k] <= 0.0)) continue;
      os << num(px(s.x[k])) << ',' << num(py(s.y[k])) << ' ';
    }
    os << "\"/>\n";
    const double ly = T + 14 + 16.0 * static_cast<double>(i);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 28 << "\" y2=\"" << ly - 4
       << "\" stroke=\"" << palette(i) << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 32 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
}

/// Grid of cells coloured by category (0 = stable, 1 = unstable, 2 = failed).
inline void heat_map(std::ostream& os, const std::string& title, const std::vector<std::string>& col_labels,
                     const std::vector<std::string>& row_labels, const std::vector<std::vector<int>>& cells) {
  const double cw = 46, ch = 24, L = 170, T = 50;
  const double W = L + cw * static_cast<double>(col_labels.size()) + 20;
  const double H = T + ch * static_cast<double>(row_labels.size()) + 70;
  static const char* fill[] = {"#4caf50", "#e53935", "#9e9e9e"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    const double y = T + ch * static_cast<double>(r);
    os << "<text x=\"" << L - 6 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"end\">" << escape(row_labels[r])
       << "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      const int v = r < cells.size() && c < cells[r].size() ? cells[r][c] : 2;
      os << "<rect x=\"" << L + cw * static_cast<double>(c) << "\" y=\"" << y << "\" width=\"" << cw - 1
         << "\" height=\"" << ch - 1 << "\" fill=\"" << fill[std::clamp(v, 0, 2)] << "\"/>\n";
    }
  }
  const double yl = T + ch * static_cast<double>(row_labels.size()) + 14;
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    const double x = L + cw * static_cast<double>(c) + cw / 2;
    os << "<text x=\"" << x << "\" y=\"" << yl << "\" text-anchor=\"end\" transform=\"rotate(-45 " << x << ' ' << yl
       << ")\">" << escape(col_labels[c]) << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace nlgt::svg

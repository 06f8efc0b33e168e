#include "asymdiff/cli/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace asymdiff::plots {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 60;

const char* const kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo, hi;
  double map(double v, double px_lo, double px_hi) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.08 * (hi - lo);
  return {lo - pad, hi + pad};
}

void frame(std::ostringstream& os, const std::string& title, const std::string& x_label,
           const std::string& y_label, const Range& y) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(title) << "</text>\n";
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 5.0;
    const double py = y.map(v, y0, y1);
    os << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x1) << "\" y2=\"" << num(py)
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << tick(v)
       << "</text>\n";
  }
  os << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
     << escape(x_label) << "</text>\n";
  os << "<text transform=\"translate(16," << num((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(y_label) << "</text>\n";
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars) {
  double lo = INFINITY, hi = -INFINITY;
  for (const Bar& b : bars) {
    lo = std::min({lo, b.value, b.low});
    hi = std::max({hi, b.value, b.high});
  }
  if (bars.empty()) lo = 0, hi = 1;
  const Range y = padded(lo, hi);
  std::ostringstream os;
  frame(os, title, "arm", y_label, y);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double slot = (x1 - x0) / std::max<std::size_t>(bars.size(), 1);
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const Bar& b = bars[i];
    const double cx = x0 + slot * (i + 0.5);
    const double top = y.map(b.value, y0, y1);
    os << "<rect x=\"" << num(cx - slot * 0.3) << "\" y=\"" << num(top) << "\" width=\"" << num(slot * 0.6)
       << "\" height=\"" << num(y0 - top) << "\" fill=\"" << kPalette[i % 6] << "\"/>\n";
    os << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y.map(b.low, y0, y1)) << "\" x2=\"" << num(cx)
       << "\" y2=\"" << num(y.map(b.high, y0, y1)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(cx) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\" font-size=\"10\">"
       << escape(b.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const Series& s : series) {
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  if (series.empty()) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  const Range x = padded(xlo, xhi);
  const Range y = padded(ylo, yhi);
  std::ostringstream os;
  frame(os, title, x_label, y_label, y);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (int i = 0; i <= 4; ++i) {
    const double v = x.lo + (x.hi - x.lo) * i / 4.0;
    os << "<text x=\"" << num(x.map(v, x0, x1)) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
       << tick(v) << "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << (i ? " " : "") << num(x.map(s.x[i], x0, x1)) << ',' << num(y.map(s.y[i], y0, y1));
    }
    os << "\"/>\n";
    os << "<text x=\"" << num(x1 - 120) << "\" y=\"" << num(y1 + 14 * (si + 1)) << "\" fill=\"" << color << "\">"
       << escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace asymdiff::plots

#pragma once

#include <string>
#include <vector>

namespace asymdiff::plots {

struct Bar {
  std::string label;
  double value = 0.0;
  double low = 0.0;   // whisker (e.g. min over seeds)
  double high = 0.0;  // whisker (e.g. max over seeds)
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Static SVG documents. Output depends only on the arguments.
std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars);
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

}  // namespace asymdiff::plots

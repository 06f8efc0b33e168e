#include "asymdiff/numeric/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "asymdiff/errors.hpp"

namespace asymdiff {

bool GradCheckReport::passed() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const auto& b) { return b.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_rel_error);
  return worst;
}

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  for (const auto& b : blocks) {
    os << (b.passed ? "ok   " : "FAIL ") << b.name << " max_rel=" << b.max_rel_error << " @"
       << b.worst_index << " (analytic " << b.analytic_at_worst << ", numeric "
       << b.numeric_at_worst << ")\n";
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::span<const GradCheckBlock> blocks, double tolerance,
                           double step) {
  GradCheckReport report;
  for (const GradCheckBlock& block : blocks) {
    if (!block.param->same_shape(*block.analytic)) {
      throw ConfigError("grad_check: analytic gradient shape mismatch for " + block.name);
    }
    GradCheckBlockReport r;
    r.name = block.name;
    for (std::size_t i = 0; i < block.param->size(); ++i) {
      double& x = (*block.param)[i];
      const double saved = x;
      x = saved + step;
      const double plus = loss_fn();
      x = saved - step;
      const double minus = loss_fn();
      x = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double analytic = (*block.analytic)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
      double rel = std::abs(analytic - numeric) / denom;
      if (std::isnan(rel)) rel = INFINITY;
      if (i == 0 || rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst_index = i;
        r.analytic_at_worst = analytic;
        r.numeric_at_worst = numeric;
      }
    }
    r.passed = r.max_rel_error < tolerance;
    report.blocks.push_back(std::move(r));
  }
  return report;
}

}  // namespace asymdiff

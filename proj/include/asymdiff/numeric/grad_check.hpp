#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "asymdiff/numeric/tensor.hpp"

namespace asymdiff {

struct GradCheckBlock {
  std::string name;
  Tensor2* param;           // perturbed in place, restored afterwards
  const Tensor2* analytic;  // same shape as *param
};

struct GradCheckBlockReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckBlockReport> blocks;
  bool passed() const;
  double max_rel_error() const;
  std::string summary() const;
};

// Gradients smaller than this are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-6;

// Central finite differences against analytic gradients.
// rel_error = |a - n| / max(|a|, |n|, kGradCheckFloor)
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::span<const GradCheckBlock> blocks, double tolerance,
                           double step = 1e-5);

}  // namespace asymdiff

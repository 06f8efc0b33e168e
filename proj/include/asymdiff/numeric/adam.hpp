#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asymdiff/numeric/tensor.hpp"

namespace asymdiff {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One learnable block handed to the optimizer: the value it mutates and the
// gradient it reads. Order must be stable across steps.
struct ParamSlot {
  std::string name;
  Tensor2* value;
  const Tensor2* grad;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Applies one update to every slot. Throws NumericError (naming the step and
  // block) if any gradient entry is non-finite; nothing is mutated in that case.
  void step(std::span<const ParamSlot> slots);

  const AdamConfig& config() const noexcept { return config_; }
  std::int64_t steps() const noexcept { return step_; }

  // Moment buffers in slot order; empty before the first step.
  const std::vector<Tensor2>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor2>& second_moments() const noexcept { return v_; }

  void restore(std::int64_t step, std::vector<Tensor2> m, std::vector<Tensor2> v);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
};

}  // namespace asymdiff

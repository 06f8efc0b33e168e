#include "asymdiff/numeric/adam.hpp"

#include <cmath>

#include "asymdiff/errors.hpp"
#include "asymdiff/numeric/kernels.hpp"

namespace asymdiff {

void Adam::step(std::span<const ParamSlot> slots) {
  for (const ParamSlot& s : slots) {
    if (!s.value->same_shape(*s.grad)) {
      throw ConfigError("adam: gradient shape " + shape_string(*s.grad) + " != parameter shape " +
                        shape_string(*s.value) + " for '" + s.name + "'");
    }
    const auto values = s.grad->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw NumericError("non-finite gradient at optimizer step " + std::to_string(step_ + 1) +
                           ", parameter '" + s.name + "' index " + std::to_string(i) +
                           ", value " + std::to_string(values[i]));
      }
    }
  }
  if (m_.empty()) {
    for (const ParamSlot& s : slots) {
      m_.emplace_back(s.value->rows(), s.value->cols());
      v_.emplace_back(s.value->rows(), s.value->cols());
    }
  }
  if (m_.size() != slots.size()) throw ConfigError("adam: parameter set changed between steps");

  ++step_;
  const double t = static_cast<double>(step_);
  const kernels::AdamCoeffs coeffs{config_.lr,
                                   config_.beta1,
                                   config_.beta2,
                                   config_.eps,
                                   1.0 - std::pow(config_.beta1, t),
                                   1.0 - std::pow(config_.beta2, t)};
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!m_[i].same_shape(*slots[i].value)) throw ConfigError("adam: moment buffer shape drift");
    k.adam_update(slots[i].value->size(), slots[i].value->data(), slots[i].grad->data(),
                  m_[i].data(), v_[i].data(), coeffs);
  }
}

void Adam::restore(std::int64_t step, std::vector<Tensor2> m, std::vector<Tensor2> v) {
  if (m.size() != v.size()) throw ConfigError("adam: moment buffer count mismatch");
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace asymdiff

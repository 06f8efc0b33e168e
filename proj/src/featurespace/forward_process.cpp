#include "asymdiff/featurespace/forward_process.hpp"

#include <random>
#include <utility>
#include <vector>

#include "asymdiff/errors.hpp"

namespace asymdiff {

std::size_t sample_step_count(Rng& rng, std::size_t n) {
  if (n == 0) throw ConfigError("sample_step_count needs at least one feature");
  return std::uniform_int_distribution<std::size_t>(0, n)(rng);
}

ForwardResult forward_process(const Sample& x0, std::size_t steps, Rng& rng) {
  ForwardResult out{x0, mask_from_observed(x0), false};
  std::vector<std::size_t> observed;
  observed.reserve(x0.features.size());
  for (std::size_t f = 0; f < x0.features.size(); ++f) {
    if (x0.features[f] != kMissingToken) observed.push_back(f);
  }
  if (steps > observed.size()) {
    out.clamped = true;
    steps = observed.size();
  }
  // Partial Fisher-Yates: step i picks uniformly among the not-yet-dropped features.
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, observed.size() - 1)(rng);
    std::swap(observed[i], observed[j]);
    out.noisy.features[observed[i]] = kMissingToken;
    out.mask.bits[observed[i]] = 1;
  }
  return out;
}

}  // namespace asymdiff

#pragma once

#include <cstddef>
#include <cstdint>

#include "asymdiff/featurespace/schema.hpp"
#include "asymdiff/random.hpp"

namespace asymdiff {

// Number of forward (feature-dropout) steps, uniform over {0, 1, ..., n}.
std::size_t sample_step_count(Rng& rng, std::size_t n);

struct ForwardResult {
  Sample noisy;
  DropoutMask mask;
  // True when the requested step count exceeded the observed features and
  // every observed feature was dropped instead.
  bool clamped = false;
};

// Drops `steps` distinct observed features of x0 (uniformly random subset,
// chosen one step at a time without replacement) by replacing them with
// kMissingToken. The mask is the union of dropped and already-missing slots.
ForwardResult forward_process(const Sample& x0, std::size_t steps, Rng& rng);

}  // namespace asymdiff

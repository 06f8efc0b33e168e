#pragma once

#include <cstddef>
#include <span>

#include "asymdiff/model/networks.hpp"
#include "asymdiff/random.hpp"
#include "asymdiff/trainer/trainer.hpp"

namespace asymdiff {

// z_k = sqrt(alpha_bar_k) z0 + sqrt(1 - alpha_bar_k) eps, eps ~ N(0, I); 1 <= k <= K.
LatentRep gaussian_forward(std::span<const double> z0, std::size_t k, const GaussianSchedule& schedule,
                           Rng& rng);

// ||g([onehot(k), z_k]) - z0||^2 with the shared denoiser architecture; the
// step-embedding slot carries the one-hot step index instead of a dropout mask.
double gaussian_reverse_loss(const ModelParams& params, std::span<const double> z0, std::size_t k,
                             const GaussianSchedule& schedule, Rng& rng);

}  // namespace asymdiff

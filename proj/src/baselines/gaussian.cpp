#include "asymdiff/baselines/gaussian.hpp"

#include <cmath>
#include <random>

#include "asymdiff/errors.hpp"
#include "asymdiff/trainer/losses.hpp"

namespace asymdiff {

LatentRep gaussian_forward(std::span<const double> z0, std::size_t k, const GaussianSchedule& schedule,
                           Rng& rng) {
  if (k < 1 || k > schedule.steps()) {
    throw ConfigError("gaussian step " + std::to_string(k) + " outside 1.." + std::to_string(schedule.steps()));
  }
  const double alpha_bar = schedule.alpha_bars[k - 1];
  const double signal = std::sqrt(alpha_bar);
  const double noise = std::sqrt(1.0 - alpha_bar);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentRep out(z0.size());
  for (std::size_t i = 0; i < z0.size(); ++i) out[i] = signal * z0[i] + noise * normal(rng);
  return out;
}

double gaussian_reverse_loss(const ModelParams& params, std::span<const double> z0, std::size_t k,
                             const GaussianSchedule& schedule, Rng& rng) {
  const LatentRep zk = gaussian_forward(z0, k, schedule, rng);
  const auto step = gaussian_step_embedding(k, params.num_features());
  const Tensor2 out = denoise_batch(params, Tensor2::row_vector(step), Tensor2::row_vector(zk));
  return loss_recon(out.row(0), z0);
}

}  // namespace asymdiff

#include "asymdiff/trainer/losses.hpp"

#include <cmath>
#include <string>

#include "asymdiff/errors.hpp"
#include "asymdiff/model/networks.hpp"
#include "asymdiff/numeric/layers.hpp"

namespace asymdiff {

double loss_main(int label, double yhat) {
  const double p = clamp_probability(yhat);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

double loss_recon(std::span<const double> z0_prime, std::span<const double> z0) {
  if (z0_prime.size() != z0.size()) {
    throw ConfigError("loss_recon: lengths " + std::to_string(z0_prime.size()) + " and " +
                      std::to_string(z0.size()) + " differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    const double d = z0_prime[i] - z0[i];
    acc += d * d;
  }
  return acc;
}

double loss_aux(int label, std::span<const double> z0_prime, const ModelParams& params) {
  return loss_main(label, predict(params, z0_prime));
}

double bce_logit_grad(int label, double logit) {
  const double p = sigmoid(logit);
  if (p < kProbEpsilon || p > 1.0 - kProbEpsilon) return 0.0;
  return p - static_cast<double>(label);
}

}  // namespace asymdiff

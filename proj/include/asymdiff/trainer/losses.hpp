#pragma once

#include <span>

#include "asymdiff/model/params.hpp"

namespace asymdiff {

// Binary cross-entropy; yhat is clamped to [eps, 1 - eps] first.
double loss_main(int label, double yhat);

// Squared Euclidean distance ||z0_prime - z0||^2. Throws ConfigError on length mismatch.
double loss_recon(std::span<const double> z0_prime, std::span<const double> z0);

// Cross-entropy of the shared predictor applied to the denoised latent.
double loss_aux(int label, std::span<const double> z0_prime, const ModelParams& params);

// d loss_main(label, clamp(sigmoid(logit))) / d logit. Zero where the clamp is active.
double bce_logit_grad(int label, double logit);

}  // namespace asymdiff

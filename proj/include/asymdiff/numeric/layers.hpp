#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include "asymdiff/numeric/tensor.hpp"

namespace asymdiff {

// Clamp applied to every probability before it reaches a log.
inline constexpr double kProbEpsilon = 1e-7;

// output = input * weight + bias, bias is 1 x d_out.
Tensor2 affine_forward(const Tensor2& input, const Tensor2& weight, const Tensor2& bias);
void affine_forward(const Tensor2& input, const Tensor2& weight, const Tensor2& bias, Tensor2& out);

struct AffineGrads {
  Tensor2 input;
  Tensor2 weight;
  Tensor2 bias;
};

AffineGrads affine_backward(const Tensor2& upstream, const Tensor2& cached_input,
                            const Tensor2& weight);

// Accumulating form used inside the networks. grad_input may be null when the
// input is a leaf; grad_weight/grad_bias are added to, not overwritten.
void affine_backward_acc(const Tensor2& upstream, const Tensor2& cached_input,
                         const Tensor2& weight, Tensor2* grad_input, Tensor2& grad_weight,
                         Tensor2& grad_bias);

Tensor2 relu_forward(const Tensor2& input);
void relu_inplace(Tensor2& x);
// upstream * 1[forward_output > 0]
Tensor2 relu_backward(const Tensor2& upstream, const Tensor2& forward_output);
void relu_backward_inplace(Tensor2& upstream, const Tensor2& forward_output);

double sigmoid(double x);
Tensor2 sigmoid_forward(const Tensor2& input);
// upstream * s * (1 - s), with s the forward output.
Tensor2 sigmoid_backward(const Tensor2& upstream, const Tensor2& forward_output);

inline double clamp_probability(double p) {
  return p < kProbEpsilon ? kProbEpsilon : (p > 1.0 - kProbEpsilon ? 1.0 - kProbEpsilon : p);
}

// Row b of the output is table row ids[b]. `feature` names the table in errors.
Tensor2 embedding_lookup(const Tensor2& table, std::span<const std::uint32_t> ids,
                         std::string_view feature = "embedding");

// grad_table row ids[b] += upstream row b (duplicates accumulate).
void embedding_backward(const Tensor2& upstream, std::span<const std::uint32_t> ids,
                        Tensor2& grad_table, std::string_view feature = "embedding");

}  // namespace asymdiff

#include "asymdiff/numeric/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "asymdiff/errors.hpp"
#include "asymdiff/numeric/kernels.hpp"

namespace asymdiff {

void affine_forward(const Tensor2& input, const Tensor2& weight, const Tensor2& bias, Tensor2& out) {
  if (input.cols() != weight.rows()) {
    throw ConfigError("affine_forward: input " + shape_string(input) + " vs weight " +
                      shape_string(weight));
  }
  require_shape(bias, 1, weight.cols(), "affine_forward bias");
  const std::size_t batch = input.rows();
  const std::size_t d_out = weight.cols();
  out.resize(batch, d_out);
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(bias.data(), d_out, out.data() + b * d_out);
  kernels::active().gemm_acc(batch, d_out, input.cols(), input.data(), weight.data(), out.data());
}

Tensor2 affine_forward(const Tensor2& input, const Tensor2& weight, const Tensor2& bias) {
  Tensor2 out;
  affine_forward(input, weight, bias, out);
  return out;
}

void affine_backward_acc(const Tensor2& upstream, const Tensor2& cached_input,
                         const Tensor2& weight, Tensor2* grad_input, Tensor2& grad_weight,
                         Tensor2& grad_bias) {
  const std::size_t batch = cached_input.rows();
  const std::size_t d_in = weight.rows();
  const std::size_t d_out = weight.cols();
  if (cached_input.cols() != d_in) throw ConfigError("affine_backward: input/weight mismatch");
  require_shape(upstream, batch, d_out, "affine_backward upstream");
  require_shape(grad_weight, d_in, d_out, "affine_backward grad_weight");
  require_shape(grad_bias, 1, d_out, "affine_backward grad_bias");
  const auto& k = kernels::active();

  std::vector<double> scratch(std::max(d_in * batch, d_out * d_in));
  if (grad_input != nullptr) {
    grad_input->resize(batch, d_in);
    grad_input->fill(0.0);
    kernels::transpose(d_in, d_out, weight.data(), scratch.data());
    k.gemm_acc(batch, d_in, d_out, upstream.data(), scratch.data(), grad_input->data());
  }
  kernels::transpose(batch, d_in, cached_input.data(), scratch.data());
  k.gemm_acc(d_in, d_out, batch, scratch.data(), upstream.data(), grad_weight.data());
  k.col_sum_acc(batch, d_out, upstream.data(), grad_bias.data());
}

AffineGrads affine_backward(const Tensor2& upstream, const Tensor2& cached_input,
                            const Tensor2& weight) {
  AffineGrads g{Tensor2(), Tensor2(weight.rows(), weight.cols()), Tensor2(1, weight.cols())};
  affine_backward_acc(upstream, cached_input, weight, &g.input, g.weight, g.bias);
  return g;
}

void relu_inplace(Tensor2& x) { kernels::active().relu(x.size(), x.data()); }

Tensor2 relu_forward(const Tensor2& input) {
  Tensor2 out = input;
  relu_inplace(out);
  return out;
}

void relu_backward_inplace(Tensor2& upstream, const Tensor2& forward_output) {
  if (!upstream.same_shape(forward_output)) throw ConfigError("relu_backward: shape mismatch");
  kernels::active().relu_mask(upstream.size(), forward_output.data(), upstream.data());
}

Tensor2 relu_backward(const Tensor2& upstream, const Tensor2& forward_output) {
  Tensor2 g = upstream;
  relu_backward_inplace(g, forward_output);
  return g;
}

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor2 sigmoid_forward(const Tensor2& input) {
  Tensor2 out(input.rows(), input.cols());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = sigmoid(input[i]);
  return out;
}

Tensor2 sigmoid_backward(const Tensor2& upstream, const Tensor2& forward_output) {
  if (!upstream.same_shape(forward_output)) throw ConfigError("sigmoid_backward: shape mismatch");
  Tensor2 g(upstream.rows(), upstream.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = forward_output[i];
    g[i] = upstream[i] * s * (1.0 - s);
  }
  return g;
}

namespace {
void check_id(std::uint32_t id, const Tensor2& table, std::string_view feature) {
  if (id >= table.rows()) {
    throw DataError("token id " + std::to_string(id) + " out of vocabulary for feature '" +
                    std::string(feature) + "' (size " + std::to_string(table.rows()) + ")");
  }
}
}  // namespace

Tensor2 embedding_lookup(const Tensor2& table, std::span<const std::uint32_t> ids,
                         std::string_view feature) {
  Tensor2 out(ids.size(), table.cols());
  for (std::size_t b = 0; b < ids.size(); ++b) {
    check_id(ids[b], table, feature);
    std::copy_n(table.row(ids[b]).data(), table.cols(), out.row(b).data());
  }
  return out;
}

void embedding_backward(const Tensor2& upstream, std::span<const std::uint32_t> ids,
                        Tensor2& grad_table, std::string_view feature) {
  require_shape(upstream, ids.size(), grad_table.cols(), "embedding_backward upstream");
  for (std::size_t b = 0; b < ids.size(); ++b) {
    check_id(ids[b], grad_table, feature);
    auto dst = grad_table.row(ids[b]);
    auto src = upstream.row(b);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

}  // namespace asymdiff

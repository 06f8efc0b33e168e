#include <cmath>

#include "asymdiff/numeric/kernels.hpp"

namespace asymdiff::kernels {
namespace {

void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
              double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void mul_add(std::size_t n, const double* x0, const double* u, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x0[i] * u[i] + x[i];
}

void relu(std::size_t n, double* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask(std::size_t n, const double* act, double* grad) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!(act[i] > 0.0)) grad[i] = 0.0;
  }
}

void col_sum_acc(std::size_t rows, std::size_t cols, const double* x, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += x[r * cols + j];
  }
}

void adam_update(std::size_t n, double* param, const double* grad, double* m, double* v,
                 const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    param[i] = param[i] - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::kScalar, "scalar", gemm_acc,    mul_add,
                                 relu,         relu_mask, col_sum_acc, adam_update};
  return table;
}

}  // namespace asymdiff::kernels

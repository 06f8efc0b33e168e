#pragma once

// Data-parallel inner loops of the numeric core. Every kernel exists as a
// portable scalar reference and as an AVX2/FMA variant; the variant is picked
// once at runtime from CPUID (override with ASYMDIFF_ISA=scalar|avx2).
//
// All matrices are dense row-major with no padding.

#include <cstddef>
#include <string_view>

namespace asymdiff::kernels {

enum class Isa { kScalar, kAvx2 };

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  const char* name;

  // C[m x n] += A[m x k] * B[k x n]. Each output element is accumulated over
  // k in increasing order starting from its incoming value, so a row of C
  // depends only on the matching row of A, never on how rows are blocked.
  void (*gemm_acc)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                   double* c);

  // out[i] = x0[i] * u[i] + x[i]   (two roundings, never fused)
  void (*mul_add)(std::size_t n, const double* x0, const double* u, const double* x, double* out);

  // x[i] = max(x[i], 0)
  void (*relu)(std::size_t n, double* x);

  // grad[i] = 0 wherever act[i] <= 0
  void (*relu_mask)(std::size_t n, const double* act, double* grad);

  // out[j] += sum_r x[r][j], rows summed in increasing order.
  void (*col_sum_acc)(std::size_t rows, std::size_t cols, const double* x, double* out);

  // One bias-corrected Adam update over n contiguous parameters.
  void (*adam_update)(std::size_t n, double* param, const double* grad, double* m, double* v,
                      const AdamCoeffs& c);
};

const KernelTable& scalar_table();

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table();

// The table used by the layers. Chosen on first use.
const KernelTable& active();

// Test and benchmark hook; throws ConfigError if the ISA is unavailable.
void set_active(Isa isa);

Isa parse_isa(std::string_view name);

// dst[cols x rows] = transpose(src[rows x cols]).
void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst);

}  // namespace asymdiff::kernels

// Built with -mavx2 -mfma; only reached after a CPUID check.

#include "asymdiff/numeric/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#define ASYMDIFF_HAVE_AVX2 1
#include <immintrin.h>
#else
#define ASYMDIFF_HAVE_AVX2 0
#endif

namespace asymdiff::kernels {

#if ASYMDIFF_HAVE_AVX2
namespace {

inline __m256i tail_mask(std::size_t lanes) {
  alignas(32) static const long long kMasks[8] = {-1, -1, -1, -1, 0, 0, 0, 0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMasks + 4 - lanes));
}

// Rows [i, i+R) x columns [j, j+8).
template <int R>
inline void block_8(std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  __m256d acc0[R], acc1[R];
  for (int r = 0; r < R; ++r) {
    acc0[r] = _mm256_loadu_pd(c + r * n);
    acc1[r] = _mm256_loadu_pd(c + r * n + 4);
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * n);
    const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
    for (int r = 0; r < R; ++r) {
      const __m256d ar = _mm256_broadcast_sd(a + r * k + p);
      acc0[r] = _mm256_fmadd_pd(ar, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_pd(ar, b1, acc1[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    _mm256_storeu_pd(c + r * n, acc0[r]);
    _mm256_storeu_pd(c + r * n + 4, acc1[r]);
  }
}

// Rows [i, i+R) x `lanes` (1..4) columns starting at j.
template <int R>
inline void block_masked(std::size_t n, std::size_t k, std::size_t lanes, const double* a,
                         const double* b, double* c) {
  const __m256i mask = tail_mask(lanes);
  __m256d acc[R];
  for (int r = 0; r < R; ++r) acc[r] = _mm256_maskload_pd(c + r * n, mask);
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d bp = _mm256_maskload_pd(b + p * n, mask);
    for (int r = 0; r < R; ++r) {
      acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a + r * k + p), bp, acc[r]);
    }
  }
  for (int r = 0; r < R; ++r) _mm256_maskstore_pd(c + r * n, mask, acc[r]);
}

template <int R>
inline void row_panel(std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) block_8<R>(n, k, a, b + j, c + j);
  for (; j < n; j += 4) {
    const std::size_t lanes = n - j < 4 ? n - j : 4;
    block_masked<R>(n, k, lanes, a, b + j, c + j);
  }
}

void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
              double* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_panel<4>(n, k, a + i * k, b, c + i * n);
  for (; i < m; ++i) row_panel<1>(n, k, a + i * k, b, c + i * n);
}

void mul_add(std::size_t n, const double* x0, const double* u, const double* x, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(x0 + i), _mm256_loadu_pd(u + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(prod, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = x0[i] * u[i] + x[i];
}

void relu(std::size_t n, double* x) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    // keep v where v > 0, else +0 (matches the scalar ternary, NaN -> 0)
    _mm256_storeu_pd(x + i, _mm256_and_pd(v, _mm256_cmp_pd(v, zero, _CMP_GT_OQ)));
  }
  for (; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask(std::size_t n, const double* act, double* grad) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d keep = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(grad + i, _mm256_and_pd(_mm256_loadu_pd(grad + i), keep));
  }
  for (; i < n; ++i) {
    if (!(act[i] > 0.0)) grad[i] = 0.0;
  }
}

void col_sum_acc(std::size_t rows, std::size_t cols, const double* x, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    __m256d acc = _mm256_loadu_pd(out + j);
    for (std::size_t r = 0; r < rows; ++r) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + r * cols + j));
    _mm256_storeu_pd(out + j, acc);
  }
  for (; j < cols; ++j) {
    double acc = out[j];
    for (std::size_t r = 0; r < rows; ++r) acc += x[r * cols + j];
    out[j] = acc;
  }
}

void adam_update(std::size_t n, double* param, const double* grad, double* m, double* v,
                 const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  if (i < n) scalar_table().adam_update(n - i, param + i, grad + i, m + i, v + i, c);
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::kAvx2, "avx2", gemm_acc,    mul_add,
                                 relu,       relu_mask, col_sum_acc, adam_update};
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace asymdiff::kernels

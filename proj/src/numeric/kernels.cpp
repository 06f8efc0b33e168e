#include "asymdiff/numeric/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "asymdiff/errors.hpp"

namespace asymdiff::kernels {
namespace {

const KernelTable* choose_default() {
  if (const char* env = std::getenv("ASYMDIFF_ISA"); env != nullptr && *env != '\0') {
    if (parse_isa(env) == Isa::kScalar) return &scalar_table();
    if (const KernelTable* t = avx2_table()) return t;
    throw ConfigError(std::string("ASYMDIFF_ISA=") + env + " is not supported on this CPU");
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{choose_default()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
  if (isa == Isa::kScalar) {
    slot().store(&scalar_table(), std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw ConfigError("avx2 kernels are not available on this CPU");
  slot().store(t, std::memory_order_release);
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  throw ConfigError("unknown ISA '" + std::string(name) + "' (expected scalar or avx2)");
}

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = r0 + kTile < rows ? r0 + kTile : rows;
      const std::size_t c1 = c0 + kTile < cols ? c0 + kTile : cols;
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

}  // namespace asymdiff::kernels

#include <atomic>
#include <stdexcept>

#include "hunter/simd/kernels.hpp"

namespace hunter::simd {

namespace {

std::atomic<int> g_forced{-1};  // -1 = auto

Variant detect() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return Variant::avx2;
#endif
  return Variant::scalar;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Variant active_variant() {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Variant>(forced);
  static const Variant detected = detect();
  return detected;
}

void force_variant(Variant v) {
  if (v == Variant::avx2 && !avx2_supported())
    throw std::runtime_error("avx2 not supported on this CPU");
  g_forced.store(static_cast<int>(v), std::memory_order_relaxed);
}

void reset_variant() { g_forced.store(-1, std::memory_order_relaxed); }

const KernelSet& active() {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_variant() == Variant::avx2) return avx2_kernels();
#endif
  return scalar_kernels();
}

}  // namespace hunter::simd

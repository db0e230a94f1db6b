#include "cdo/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace cdo::kernels {

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("COUPLED_DO_SIMD")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return detected_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

Isa detected_isa() {
#if CDO_HAVE_AVX2_KERNELS
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

Isa set_isa(Isa isa) {
  if (isa == Isa::Avx2 && detected_isa() != Isa::Avx2) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
  return isa;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

#if CDO_HAVE_AVX2_KERNELS
#define CDO_DISPATCH(fn, ...) \
  (active_isa() == Isa::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define CDO_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void chebyshev_table(std::span<const double> tau, int order, std::span<double> out) {
  CDO_DISPATCH(chebyshev_table, tau, order, out);
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  CDO_DISPATCH(hadamard, a, b, out);
}

double dot(std::span<const double> a, std::span<const double> b) {
  return CDO_DISPATCH(dot, a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  CDO_DISPATCH(axpy, alpha, x, y);
}

#undef CDO_DISPATCH

}  // namespace cdo::kernels

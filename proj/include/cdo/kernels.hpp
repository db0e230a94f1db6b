#pragma once

// Data-parallel inner loops used by basis evaluation and least-squares
// assembly. Every kernel has a portable scalar reference implementation and,
// on x86-64, an AVX2/FMA variant. The active variant is chosen once at
// startup from CPUID and can be overridden for testing.

#include <cstddef>
#include <span>
#include <string_view>

namespace cdo::kernels {

enum class Isa { Scalar, Avx2 };

/// Variant currently used by the dispatching entry points below.
Isa active_isa();

/// Best variant supported by this CPU.
Isa detected_isa();

/// Forces a variant. Requesting Avx2 on a CPU without it falls back to Scalar.
/// Returns the variant actually selected.
Isa set_isa(Isa isa);

std::string_view isa_name(Isa isa);

/// Chebyshev table T_0..T_order evaluated at every entry of `tau`.
/// Layout is order-major: out[k * tau.size() + i] = T_k(tau[i]).
/// `out` must hold (order + 1) * tau.size() values.
void chebyshev_table(std::span<const double> tau, int order, std::span<double> out);

/// out[i] = a[i] * b[i]
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);

/// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

/// y[i] += alpha * x[i]
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Fixed-variant entry points, exposed for equivalence testing.
namespace scalar {
void chebyshev_table(std::span<const double> tau, int order, std::span<double> out);
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define CDO_HAVE_AVX2_KERNELS 1
namespace avx2 {
void chebyshev_table(std::span<const double> tau, int order, std::span<double> out);
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
}  // namespace avx2
#else
#define CDO_HAVE_AVX2_KERNELS 0
#endif

}  // namespace cdo::kernels

// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include "cdo/kernels.hpp"

#include <immintrin.h>

#include <cassert>

namespace cdo::kernels::avx2 {

void chebyshev_table(std::span<const double> tau, int order, std::span<double> out) {
  const std::size_t count = tau.size();
  assert(order >= 0);
  assert(out.size() >= static_cast<std::size_t>(order + 1) * count);
  const std::size_t bound = count - count % 4;
  const __m256d one = _mm256_set1_pd(1.0);

  double* t0 = out.data();
  std::size_t i = 0;
  for (; i < bound; i += 4) _mm256_storeu_pd(t0 + i, one);
  for (; i < count; ++i) t0[i] = 1.0;
  if (order == 0) return;

  double* t1 = out.data() + count;
  i = 0;
  for (; i < bound; i += 4) _mm256_storeu_pd(t1 + i, _mm256_loadu_pd(tau.data() + i));
  for (; i < count; ++i) t1[i] = tau[i];

  for (int k = 2; k <= order; ++k) {
    const double* prev2 = out.data() + static_cast<std::size_t>(k - 2) * count;
    const double* prev1 = out.data() + static_cast<std::size_t>(k - 1) * count;
    double* cur = out.data() + static_cast<std::size_t>(k) * count;
    i = 0;
    for (; i < bound; i += 4) {
      const __m256d two_tau = _mm256_add_pd(_mm256_loadu_pd(tau.data() + i),
                                            _mm256_loadu_pd(tau.data() + i));
      const __m256d r = _mm256_fmsub_pd(two_tau, _mm256_loadu_pd(prev1 + i),
                                        _mm256_loadu_pd(prev2 + i));
      _mm256_storeu_pd(cur + i, r);
    }
    for (; i < count; ++i) cur[i] = 2.0 * tau[i] * prev1[i] - prev2[i];
  }
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && out.size() >= a.size());
  const std::size_t n = a.size();
  const std::size_t bound = n - n % 4;
  std::size_t i = 0;
  for (; i < bound; i += 4) {
    _mm256_storeu_pd(out.data() + i,
                     _mm256_mul_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  const std::size_t bound = n - n % 8;
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i < bound; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4),
                           _mm256_loadu_pd(b.data() + i + 4), acc1);
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double sum = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  const std::size_t bound = n - n % 4;
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i < bound; i += 4) {
    _mm256_storeu_pd(y.data() + i,
                     _mm256_fmadd_pd(a, _mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace cdo::kernels::avx2

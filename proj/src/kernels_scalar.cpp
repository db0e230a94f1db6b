#include "cdo/kernels.hpp"

#include <cassert>

namespace cdo::kernels::scalar {

void chebyshev_table(std::span<const double> tau, int order, std::span<double> out) {
  const std::size_t count = tau.size();
  assert(order >= 0);
  assert(out.size() >= static_cast<std::size_t>(order + 1) * count);
  double* t0 = out.data();
  for (std::size_t i = 0; i < count; ++i) t0[i] = 1.0;
  if (order == 0) return;
  double* t1 = out.data() + count;
  for (std::size_t i = 0; i < count; ++i) t1[i] = tau[i];
  for (int k = 2; k <= order; ++k) {
    const double* prev2 = out.data() + static_cast<std::size_t>(k - 2) * count;
    const double* prev1 = out.data() + static_cast<std::size_t>(k - 1) * count;
    double* cur = out.data() + static_cast<std::size_t>(k) * count;
    for (std::size_t i = 0; i < count; ++i) {
      cur[i] = 2.0 * tau[i] * prev1[i] - prev2[i];
    }
  }
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  assert(a.size() == b.size() && out.size() >= a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace cdo::kernels::scalar

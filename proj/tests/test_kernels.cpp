#include "cdo/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace cdo::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar chebyshev table matches the closed form") {
  const auto tau = random_vector(37, 1);
  std::vector<double> out(6 * tau.size());
  scalar::chebyshev_table(tau, 5, out);
  for (int k = 0; k <= 5; ++k) {
    for (std::size_t i = 0; i < tau.size(); ++i) {
      CHECK(out[k * tau.size() + i] == doctest::Approx(std::cos(k * std::acos(tau[i]))).epsilon(1e-13));
    }
  }
}

TEST_CASE("order zero table is all ones") {
  const auto tau = random_vector(5, 2);
  std::vector<double> out(tau.size());
  chebyshev_table(tau, 0, out);
  for (double v : out) CHECK(v == 1.0);
}

#if CDO_HAVE_AVX2_KERNELS
TEST_CASE("avx2 kernels agree with scalar kernels") {
  if (detected_isa() != Isa::Avx2) return;
  // Lengths straddle the vector width and the tail loop.
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 16u, 31u, 1000u, 1003u}) {
    CAPTURE(n);
    const auto a = random_vector(n, 10 + static_cast<unsigned>(n), -3.0, 3.0);
    const auto b = random_vector(n, 20 + static_cast<unsigned>(n), -3.0, 3.0);

    std::vector<double> hs(n), hv(n);
    scalar::hadamard(a, b, hs);
    avx2::hadamard(a, b, hv);
    CHECK(hs == hv);

    const double ds = scalar::dot(a, b), dv = avx2::dot(a, b);
    CHECK(std::abs(ds - dv) <= 1e-12 * (1.0 + std::abs(ds)) * static_cast<double>(n + 1));

    std::vector<double> ys = b, yv = b;
    scalar::axpy(0.37, a, ys);
    avx2::axpy(0.37, a, yv);
    for (std::size_t i = 0; i < n; ++i) CHECK(ys[i] == doctest::Approx(yv[i]).epsilon(1e-15));

    for (int order : {0, 1, 2, 6}) {
      std::vector<double> ts((order + 1) * n), tv((order + 1) * n);
      scalar::chebyshev_table(a, order, ts);
      avx2::chebyshev_table(a, order, tv);
      for (std::size_t i = 0; i < ts.size(); ++i) {
        CHECK(std::abs(ts[i] - tv[i]) <= 1e-12 * (1.0 + std::abs(ts[i])));
      }
    }
  }
}
#endif

TEST_CASE("isa override round trip") {
  const Isa before = active_isa();
  CHECK(set_isa(Isa::Scalar) == Isa::Scalar);
  CHECK(active_isa() == Isa::Scalar);
  const auto a = random_vector(64, 3);
  const double scalar_dot = dot(a, a);
  set_isa(detected_isa());
  CHECK(dot(a, a) == doctest::Approx(scalar_dot).epsilon(1e-14));
  set_isa(before);
  CHECK(isa_name(Isa::Scalar) == "scalar");
}

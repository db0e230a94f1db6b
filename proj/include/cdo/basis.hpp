#pragma once

// Chebyshev tensor-product basis for separated disturbance models
//
//   Delta(x, d) ~= Theta * B(x) * xi(d)
//
// Pi(x) collects the products T_{k_1}(x_1)...T_{k_n}(x_n) over all state
// multi-indices, xi(d) the products over all feature multi-indices, and
// B(x) places Pi(x) in the j-th block of column j. Flat indices are
// least-significant-digit first in base (p+1); that ordering is also the
// column layout of Theta in model files.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace cdo {

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

struct BasisConfig {
  int order = 2;        // p, shared by every dimension
  int state_dim = 1;    // n
  int feature_dim = 1;  // m; 1 for the time feature
  bool normalize = false;
  std::vector<Interval> state_box;    // n entries when normalize is on
  std::vector<Interval> feature_box;  // m entries when normalize is on

  /// (p+1)^n, the length of Pi(x).
  std::size_t state_block() const;
  /// (p+1)^(n+m), the column count of Theta.
  std::size_t s1() const;
  /// (p+1)^m, the length of xi(d).
  std::size_t s2() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

bool operator==(const Interval& a, const Interval& b);
bool operator==(const BasisConfig& a, const BasisConfig& b);

struct MultiIndex {
  std::vector<int> digits;  // k_1..k_dims, least significant first
  std::size_t flat = 0;
};

/// T_k(tau) by the three-term recurrence; plain polynomial outside [-1, 1].
double cheb_eval(int k, double tau);

/// Base-(p+1) digits of h. Throws std::out_of_range if h >= (p+1)^dims.
MultiIndex flat_to_multi(std::size_t h, int order, int dims);

std::size_t multi_to_flat(std::span<const int> digits, int order);

/// base^exp for small non-negative integers; throws std::overflow_error.
std::size_t int_pow(std::size_t base, int exp);

/// Chebyshev-to-monomial change of basis D (xi = D * varsigma) and the
/// exosystem generator A (d/dt varsigma = A * varsigma).
struct StructureMatrices {
  Eigen::MatrixXd D;
  Eigen::MatrixXd A;
};

StructureMatrices structure_matrices(std::size_t s2);

/// [1, t, ..., t^(size-1)]
Eigen::VectorXd monomial_vector(double t, std::size_t size);

class ChebyshevBasis {
 public:
  explicit ChebyshevBasis(BasisConfig config);

  const BasisConfig& config() const { return config_; }

  Eigen::VectorXd normalize_state(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd normalize_feature(const Eigen::Ref<const Eigen::VectorXd>& d) const;

  /// d(tau)/dt for the time feature: 2/(hi-lo) when normalizing, else 1.
  double time_scale() const;

  Eigen::VectorXd pi_vector(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd b_matrix(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd xi_vector(const Eigen::Ref<const Eigen::VectorXd>& d) const;
  Eigen::VectorXd xi_vector(double t) const;
  /// Monomials of the (normalized) time feature, length s2. Time-feature only.
  Eigen::VectorXd monomial_vector(double t) const;

  /// B(x) * xi(d), computed without materializing B.
  Eigen::VectorXd feature_row(const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& d) const;

  /// Row i is feature_row(states.row(i), features.row(i)); N x s1, built
  /// column by column with the batch kernels.
  Eigen::MatrixXd feature_matrix(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                 const Eigen::Ref<const Eigen::MatrixXd>& features) const;

 private:
  Eigen::VectorXd tensor_vector(const Eigen::VectorXd& normalized) const;

  BasisConfig config_;
};

}  // namespace cdo

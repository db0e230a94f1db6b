#pragma once

// Higher-order disturbance observer (HODO) for Delta = C(x) varsigma(t),
// varsigma' = A varsigma, with C(x) = Theta B(x) D:
//
//   z'          = A sigma_hat - Gamma (f_x(x) + f_u(x) u + C(x) sigma_hat)
//   sigma_hat   = z + Gamma x
//   Delta_hat   = C(x) sigma_hat
//
// Gamma is re-synthesized at every step by frozen-time pole placement on the
// observability matrix of (A, w C(x)), and a first-order disturbance
// observer is provided as the comparison baseline.

#include "cdo/dynamics.hpp"
#include "cdo/learner.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

namespace cdo {

using Poles = std::vector<std::complex<double>>;

/// Coefficients of prod (s - pole), highest power first (leading 1).
/// Throws std::invalid_argument if the product is not real.
Eigen::VectorXd monic_polynomial(const Poles& poles);

/// Characteristic polynomial of a square matrix, highest power first.
Eigen::VectorXd characteristic_polynomial(const Eigen::MatrixXd& m);

/// Single-output Ackermann synthesis: Gamma = q(A) O^{-1} e_last, placing the
/// spectrum of A - Gamma c at `poles`. Throws Unobservable when the
/// observability matrix condition number exceeds `cond_limit`, and
/// std::invalid_argument for poles that are not stable or do not match A.
Eigen::VectorXd design_gain(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& c,
                            const Poles& poles, double cond_limit = 1e8);

struct HodoOptions {
  Poles poles;                     // s2 values, Re < 0
  double cond_limit = 1e8;
  Eigen::VectorXd output_weights;  // unit norm; empty selects uniform
  bool verify_placement = false;   // check char. polynomial after every design
};

struct HodoState {
  Eigen::VectorXd z;
  Eigen::VectorXd sigma_hat;
  Eigen::MatrixXd gamma;            // s2 x n
  Eigen::MatrixXd last_good_gamma;  // s2 x n
  bool gain_fallback = false;       // last step reused last_good_gamma
  std::size_t fallback_count = 0;
  double placement_error = 0.0;     // verify mode only
};

struct HodoStep {
  HodoState state;
  Eigen::VectorXd delta_hat;
};

class HigherOrderObserver {
 public:
  HigherOrderObserver(SeparatedModel model, ControlAffineDynamics dynamics, HodoOptions options);

  const SeparatedModel& model() const { return model_; }
  const HodoOptions& options() const { return options_; }

  /// Gamma_h (s2 x n) at state x. Throws Unobservable.
  Eigen::MatrixXd gain(const Eigen::VectorXd& x) const;

  /// State with sigma_hat(0) = sigma0 (zero when empty).
  HodoState init(const Eigen::VectorXd& x0, const Eigen::VectorXd& sigma0 = {}) const;

  /// C(x) (z + Gamma x) without advancing time.
  Eigen::VectorXd estimate(const HodoState& state, const Eigen::VectorXd& x) const;

  /// Re-synthesizes the gain at x, then integrates z over dt with RK4 holding
  /// (x, u). z is re-anchored on gain changes so sigma_hat stays continuous.
  HodoStep step(HodoState state, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                double dt) const;

 private:
  double check_placement(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& x) const;

  SeparatedModel model_;
  ControlAffineDynamics dynamics_;
  HodoOptions options_;
  Eigen::MatrixXd exosystem_;
  Eigen::VectorXd weights_;
};

struct NdoState {
  Eigen::VectorXd z;
};

/// Classical first-order observer, Delta_hat' = L (Delta - Delta_hat):
///   z' = -L z - L (L x + f_x(x) + f_u(x) u),  Delta_hat = z + L x.
class FirstOrderObserver {
 public:
  FirstOrderObserver(ControlAffineDynamics dynamics, double gain);

  double gain() const { return gain_; }
  NdoState init(const Eigen::VectorXd& x0, const Eigen::VectorXd& delta0 = {}) const;
  Eigen::VectorXd estimate(const NdoState& state, const Eigen::VectorXd& x) const;
  std::pair<NdoState, Eigen::VectorXd> step(NdoState state, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& u, double dt) const;

 private:
  ControlAffineDynamics dynamics_;
  double gain_;
};

}  // namespace cdo

#pragma once

// Offline identification of the separated model Theta from trajectory data.
//
// The regularized objective
//   1/2 [ sum_n ||Delta_n - Theta B(x_n) xi(t_n)||^2 + delta ||Theta||_F^2 ]
// has the closed form
//   Theta* = (sum Delta_n phi_n^T) (sum phi_n phi_n^T + delta I)^{-1},
// phi_n = B(x_n) xi(t_n). It is solved through a Cholesky factorization of
// the (Jacobi-equilibrated) regularized Gram matrix.

#include "cdo/basis.hpp"
#include "cdo/dynamics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdo {

/// Time-stamped samples (t, x, u) with optional disturbance targets.
/// Rows of x, u and delta are samples.
struct TrajectoryDataset {
  std::vector<double> t;
  Eigen::MatrixXd x;                     // N x n
  Eigen::MatrixXd u;                     // N x o, o may be 0
  std::optional<Eigen::MatrixXd> delta;  // N x n

  std::size_t size() const { return t.size(); }
  int state_dim() const { return static_cast<int>(x.cols()); }
  int input_dim() const { return static_cast<int>(u.cols()); }

  /// Checks shapes and finiteness; optionally targets and strictly
  /// increasing timestamps. Throws DataError.
  void validate(bool require_targets, bool require_increasing_time) const;

  TrajectoryDataset subset(std::span<const std::size_t> rows) const;

  /// Time column as an N x 1 matrix, the feature input of the basis.
  Eigen::MatrixXd time_features() const;
};

/// Theta together with the basis it was trained for.
class SeparatedModel {
 public:
  SeparatedModel(BasisConfig config, Eigen::MatrixXd theta);

  const Eigen::MatrixXd& theta() const { return theta_; }
  const ChebyshevBasis& basis() const { return basis_; }
  const BasisConfig& config() const { return basis_.config(); }
  const StructureMatrices& structure() const { return structure_; }
  int output_dim() const { return static_cast<int>(theta_.rows()); }

  /// Theta B(x) xi(d)
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& feature) const;
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x, double t) const;

  /// Theta B(x); n x s2 without forming B.
  Eigen::MatrixXd state_map(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// C(x) = Theta B(x) D, so Delta = C(x) varsigma(t). Time feature only.
  Eigen::MatrixXd output_map(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Exosystem generator in model time: A scaled by the time normalization.
  Eigen::MatrixXd exosystem() const;

  /// N x n predictions for every record of a time-feature dataset.
  Eigen::MatrixXd predict_batch(const TrajectoryDataset& data) const;

 private:
  ChebyshevBasis basis_;
  Eigen::MatrixXd theta_;
  StructureMatrices structure_;
};

struct FitReport {
  double train_mae = 0.0;
  std::optional<double> test_mae;
  double gram_condition = 0.0;
  double residual_sup = 0.0;  // on the test set when present, else train
  std::optional<double> theta_error;
};

struct ErrorStats {
  double mae = 0.0;
  double sup = 0.0;
};

struct FitResult {
  SeparatedModel model;
  FitReport report;
};

/// Derivative estimates by centered sliding-window least-squares polynomial
/// fits; Delta = x' - f_x(x) - f_u(x) u. Samples without a full window are
/// dropped. Throws DataError / ConfigError.
TrajectoryDataset targets_from_trajectory(const TrajectoryDataset& trajectory,
                                          const ControlAffineDynamics& dynamics,
                                          int window = 9, int fit_order = 3);

FitResult fit_rls(const TrajectoryDataset& data, const BasisConfig& config, double delta);

/// MAE = mean_i ||Delta_i - Delta_hat_i||_2 and its maximum.
ErrorStats evaluate(const SeparatedModel& model, const TrajectoryDataset& data);

/// sum_n (Delta_n - Theta phi_n) phi_n^T - delta Theta, the negative gradient
/// of the objective. Zero at the optimum.
Eigen::MatrixXd rls_gradient(const SeparatedModel& model, const TrajectoryDataset& data,
                             double delta);

/// Scale of the gradient terms, ||sum Delta_n phi_n^T||_F, for relative checks.
double rls_gradient_scale(const SeparatedModel& model, const TrajectoryDataset& data);

// -- synthetic experiments -------------------------------------------------

struct SyntheticSpec {
  std::string function = "sine_product";
  Interval state_box{-2, 2};
  Interval time_box{0, 4};
  std::size_t samples = 10000;
  double train_fraction = 0.5;
  double noise_variance = 0.0;
  /// Also corrupt the test inputs; by default only training x is noisy.
  bool noisy_test = false;
  std::uint64_t seed = 1;
  std::uint64_t repeat = 0;
};

struct DataSplit {
  TrajectoryDataset train;
  TrajectoryDataset test;
};

/// Uniform samples over the box, shuffled and split; targets are computed
/// from the clean state, then the stored training x receives N(0, sigma^2).
DataSplit make_synthetic_split(const SyntheticSpec& spec);

struct SweepConfig {
  std::vector<std::string> functions{"sine_product", "cubic_quadratic", "sine_cubic"};
  std::vector<int> orders{1, 2, 3, 4, 5, 6};
  std::vector<double> noise_variances{0.0, 0.01, 0.05, 0.1};
  SyntheticSpec data;  // function and noise_variance are overridden per cell
  double delta = 0.01;
  bool normalize = false;
  /// Independent dataset draws averaged per cell.
  int repeats = 1;
};

struct SweepCellKey {
  std::string function;
  int order = 0;
  double noise_variance = 0.0;
};

struct SweepCell {
  SweepCellKey key;
  std::optional<FitReport> report;  // averaged over repeats
  std::string error;                // non-empty when the cell failed
};

std::vector<SweepCellKey> sweep_grid(const SweepConfig& config);

/// Runs the given cells, up to `threads` at a time (0 = hardware
/// concurrency). Results are in input order and independent of `threads`.
std::vector<SweepCell> run_sweep(const SweepConfig& config, std::span<const SweepCellKey> cells,
                                 unsigned threads = 1);

/// Basis for a scalar-state, time-feature experiment over the given boxes.
BasisConfig time_feature_basis(int order, bool normalize, Interval state_box, Interval time_box);

}  // namespace cdo

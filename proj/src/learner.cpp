#include "cdo/learner.hpp"

#include "cdo/error.hpp"
#include "cdo/kernels.hpp"
#include "cdo/random.hpp"
#include "cdo/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>
#include <thread>

namespace cdo {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.col(c).data(), static_cast<std::size_t>(m.rows())};
}

void check_model_inputs(const BasisConfig& config, const TrajectoryDataset& data) {
  if (config.feature_dim != 1) {
    throw ConfigError("basis.feature_dim", "trajectory learning uses the scalar time feature");
  }
  if (data.state_dim() != config.state_dim) {
    throw DataError("dataset has " + std::to_string(data.state_dim()) +
                    " state columns, basis expects " + std::to_string(config.state_dim));
  }
}

}  // namespace

// -- TrajectoryDataset -----------------------------------------------------

void TrajectoryDataset::validate(bool require_targets, bool require_increasing_time) const {
  const auto n = static_cast<Eigen::Index>(t.size());
  if (x.rows() != n || u.rows() != n) {
    throw DataError("dataset columns have inconsistent lengths");
  }
  if (x.cols() < 1) throw DataError("dataset has no state columns");
  if (require_targets && !delta) throw DataError("dataset has no disturbance targets");
  if (delta && (delta->rows() != n || delta->cols() != x.cols())) {
    throw DataError("delta targets must be N x n");
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) throw DataError("non-finite timestamp at record " + std::to_string(i));
    if (require_increasing_time && i > 0 && !(t[i] > t[i - 1])) {
      throw DataError("timestamps not strictly increasing at record " + std::to_string(i));
    }
  }
  if (!all_finite(x) || !all_finite(u) || (delta && !all_finite(*delta))) {
    throw DataError("dataset contains non-finite values");
  }
}

TrajectoryDataset TrajectoryDataset::subset(std::span<const std::size_t> rows) const {
  TrajectoryDataset out;
  out.t.reserve(rows.size());
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.u.resize(static_cast<Eigen::Index>(rows.size()), u.cols());
  if (delta) out.delta = Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), delta->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    const auto k = static_cast<Eigen::Index>(i);
    out.t.push_back(t[rows[i]]);
    out.x.row(k) = x.row(r);
    out.u.row(k) = u.row(r);
    if (delta) out.delta->row(k) = delta->row(r);
  }
  return out;
}

Eigen::MatrixXd TrajectoryDataset::time_features() const {
  return Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
}

// -- SeparatedModel --------------------------------------------------------

SeparatedModel::SeparatedModel(BasisConfig config, Eigen::MatrixXd theta)
    : basis_(std::move(config)), theta_(std::move(theta)),
      structure_(structure_matrices(basis_.config().s2())) {
  if (static_cast<std::size_t>(theta_.cols()) != basis_.config().s1()) {
    throw ConfigError("theta", "has " + std::to_string(theta_.cols()) + " columns, basis needs " +
                                   std::to_string(basis_.config().s1()));
  }
  if (theta_.rows() != basis_.config().state_dim) {
    throw ConfigError("theta", "row count must equal the state dimension");
  }
}

Eigen::VectorXd SeparatedModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const Eigen::Ref<const Eigen::VectorXd>& feature) const {
  return theta_ * basis_.feature_row(x, feature);
}

Eigen::VectorXd SeparatedModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x, double t) const {
  return predict(x, Eigen::VectorXd::Constant(1, t));
}

Eigen::MatrixXd SeparatedModel::state_map(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd pi = basis_.pi_vector(x);
  const auto block = pi.size();
  const auto s2 = static_cast<Eigen::Index>(basis_.config().s2());
  Eigen::MatrixXd out(theta_.rows(), s2);
  for (Eigen::Index j = 0; j < s2; ++j) {
    out.col(j) = theta_.middleCols(j * block, block) * pi;
  }
  return out;
}

Eigen::MatrixXd SeparatedModel::output_map(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (basis_.config().feature_dim != 1) {
    throw std::invalid_argument("output_map requires the scalar time feature");
  }
  return state_map(x) * structure_.D;
}

Eigen::MatrixXd SeparatedModel::exosystem() const { return basis_.time_scale() * structure_.A; }

Eigen::MatrixXd SeparatedModel::predict_batch(const TrajectoryDataset& data) const {
  check_model_inputs(config(), data);
  const Eigen::MatrixXd features = basis_.feature_matrix(data.x, data.time_features());
  const auto rows = static_cast<std::size_t>(features.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(features.rows(), theta_.rows());
  for (Eigen::Index r = 0; r < theta_.rows(); ++r) {
    std::span<double> y(out.col(r).data(), rows);
    for (Eigen::Index h = 0; h < features.cols(); ++h) {
      kernels::axpy(theta_(r, h), column(features, h), y);
    }
  }
  return out;
}

// -- derivative targets ----------------------------------------------------

TrajectoryDataset targets_from_trajectory(const TrajectoryDataset& trajectory,
                                          const ControlAffineDynamics& dynamics, int window,
                                          int fit_order) {
  if (fit_order < 1) throw ConfigError("learning.fit_order", "must be at least 1");
  if (window % 2 == 0 || window <= fit_order) {
    throw ConfigError("learning.window", "must be odd and larger than fit_order");
  }
  trajectory.validate(false, true);
  if (trajectory.size() < static_cast<std::size_t>(window)) {
    throw DataError("insufficient data: trajectory has " + std::to_string(trajectory.size()) +
                    " samples, window needs " + std::to_string(window));
  }
  if (trajectory.state_dim() != dynamics.state_dim || trajectory.input_dim() != dynamics.input_dim) {
    throw DataError("trajectory dimensions do not match the plant");
  }

  const std::size_t half = static_cast<std::size_t>(window / 2);
  std::vector<std::size_t> kept;
  for (std::size_t i = half; i + half < trajectory.size(); ++i) kept.push_back(i);
  TrajectoryDataset out = trajectory.subset(kept);
  out.delta = Eigen::MatrixXd(static_cast<Eigen::Index>(kept.size()), trajectory.x.cols());

  Eigen::MatrixXd vander(window, fit_order + 1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::size_t c = kept[k];
    const double tc = trajectory.t[c];
    const double scale = std::max(tc - trajectory.t[c - half], trajectory.t[c + half] - tc);
    for (int j = 0; j < window; ++j) {
      const double s = (trajectory.t[c - half + static_cast<std::size_t>(j)] - tc) / scale;
      double p = 1.0;
      for (int q = 0; q <= fit_order; ++q) {
        vander(j, q) = p;
        p *= s;
      }
    }
    const Eigen::MatrixXd rhs =
        trajectory.x.middleRows(static_cast<Eigen::Index>(c - half), window);
    const Eigen::MatrixXd coeffs = vander.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd xdot = coeffs.row(1).transpose() / scale;
    const Eigen::VectorXd xc = trajectory.x.row(static_cast<Eigen::Index>(c)).transpose();
    const Eigen::VectorXd uc = trajectory.u.row(static_cast<Eigen::Index>(c)).transpose();
    out.delta->row(static_cast<Eigen::Index>(k)) = (xdot - dynamics.nominal(xc, uc)).transpose();
  }
  return out;
}

// -- regularized least squares ---------------------------------------------

FitResult fit_rls(const TrajectoryDataset& data, const BasisConfig& config, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ConfigError("learning.delta", "regularization must be a positive finite number");
  }
  if (data.size() == 0) throw DataError("cannot fit on an empty dataset");
  data.validate(true, false);
  config.validate();
  check_model_inputs(config, data);

  const ChebyshevBasis basis(config);
  const Eigen::MatrixXd features = basis.feature_matrix(data.x, data.time_features());
  if (!features.allFinite()) throw NumericalError("basis evaluation overflowed");
  const Eigen::MatrixXd& targets = *data.delta;
  const Eigen::Index s1 = features.cols();

  Eigen::MatrixXd gram(s1, s1);
  for (Eigen::Index i = 0; i < s1; ++i) {
    for (Eigen::Index j = i; j < s1; ++j) {
      gram(i, j) = kernels::dot(column(features, i), column(features, j));
      gram(j, i) = gram(i, j);
    }
  }
  // rhs(h, r) = sum_n phi_n[h] Delta_n[r]
  Eigen::MatrixXd rhs(s1, targets.cols());
  for (Eigen::Index r = 0; r < targets.cols(); ++r) {
    for (Eigen::Index h = 0; h < s1; ++h) {
      rhs(h, r) = kernels::dot(column(features, h), column(targets, r));
    }
  }

  Eigen::MatrixXd regularized = gram;
  regularized.diagonal().array() += delta;

  // Jacobi equilibration: raw Chebyshev columns over wide boxes differ in
  // scale by many orders of magnitude.
  const Eigen::VectorXd scale = regularized.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd equilibrated = scale.asDiagonal() * regularized * scale.asDiagonal();
  const Eigen::LLT<Eigen::MatrixXd> llt(equilibrated);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("regularized Gram matrix is not numerically positive definite");
  }
  auto solve = [&](const Eigen::MatrixXd& b) -> Eigen::MatrixXd {
    return scale.asDiagonal() * llt.solve(scale.asDiagonal() * b);
  };
  Eigen::MatrixXd theta_t = solve(rhs);
  // One step of iterative refinement.
  theta_t += solve(rhs - regularized * theta_t);
  if (!theta_t.allFinite()) throw NumericalError("RLS solution is not finite");

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(regularized, Eigen::EigenvaluesOnly);
  const double cond = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();

  FitResult result{SeparatedModel(config, theta_t.transpose()), FitReport{}};
  const ErrorStats train = evaluate(result.model, data);
  result.report.train_mae = train.mae;
  result.report.residual_sup = train.sup;
  result.report.gram_condition = cond;
  return result;
}

ErrorStats evaluate(const SeparatedModel& model, const TrajectoryDataset& data) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  data.validate(true, false);
  const Eigen::MatrixXd residual = *data.delta - model.predict_batch(data);
  const Eigen::VectorXd norms = residual.rowwise().norm();
  return {norms.mean(), norms.maxCoeff()};
}

Eigen::MatrixXd rls_gradient(const SeparatedModel& model, const TrajectoryDataset& data,
                             double delta) {
  data.validate(true, false);
  const Eigen::MatrixXd features =
      model.basis().feature_matrix(data.x, data.time_features());
  const Eigen::MatrixXd residual = *data.delta - features * model.theta().transpose();
  return residual.transpose() * features - delta * model.theta();
}

double rls_gradient_scale(const SeparatedModel& model, const TrajectoryDataset& data) {
  const Eigen::MatrixXd features =
      model.basis().feature_matrix(data.x, data.time_features());
  return (data.delta->transpose() * features).norm();
}

// -- synthetic experiments -------------------------------------------------

BasisConfig time_feature_basis(int order, bool normalize, Interval state_box, Interval time_box) {
  BasisConfig config;
  config.order = order;
  config.state_dim = 1;
  config.feature_dim = 1;
  config.normalize = normalize;
  config.state_box = {state_box};
  config.feature_box = {time_box};
  return config;
}

DataSplit make_synthetic_split(const SyntheticSpec& spec) {
  if (!(spec.train_fraction > 0.0) || spec.train_fraction > 1.0) {
    throw ConfigError("learning.train_fraction", "must be in (0, 1]");
  }
  if (spec.noise_variance < 0.0 || !std::isfinite(spec.noise_variance)) {
    throw ConfigError("learning.noise_variance", "must be non-negative");
  }
  TrajectoryDataset all = generate_training_run(spec.function, spec.state_box, spec.time_box,
                                                spec.samples, spec.seed, spec.repeat);

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto shuffle_rng = make_stream(spec.seed, "split", spec.repeat);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  const auto n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(all.size()))));

  DataSplit split;
  split.train = all.subset(std::span(order).first(n_train));
  split.test = all.subset(std::span(order).subspan(n_train));

  // Standard normals drawn independently of the variance, so cells that
  // differ only in sigma^2 see the same noise realization up to scale.
  auto noise_rng = make_stream(spec.seed, "state-noise", spec.repeat);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = std::sqrt(spec.noise_variance);
  for (Eigen::Index i = 0; i < split.train.x.size(); ++i) {
    split.train.x.data()[i] += sigma * normal(noise_rng);
  }
  if (spec.noisy_test) {
    for (Eigen::Index i = 0; i < split.test.x.size(); ++i) {
      split.test.x.data()[i] += sigma * normal(noise_rng);
    }
  }
  return split;
}

std::vector<SweepCellKey> sweep_grid(const SweepConfig& config) {
  std::vector<SweepCellKey> cells;
  for (const auto& fn : config.functions) {
    for (int p : config.orders) {
      for (double var : config.noise_variances) cells.push_back({fn, p, var});
    }
  }
  return cells;
}

namespace {

SweepCell run_cell(const SweepConfig& config, const SweepCellKey& key) {
  SweepCell cell{key, std::nullopt, {}};
  try {
    if (config.repeats < 1) throw ConfigError("sweep.repeats", "must be at least 1");
    FitReport mean;
    mean.test_mae = 0.0;
    mean.residual_sup = 0.0;
    for (int r = 0; r < config.repeats; ++r) {
      SyntheticSpec spec = config.data;
      spec.function = key.function;
      spec.noise_variance = key.noise_variance;
      spec.repeat = static_cast<std::uint64_t>(r);
      const DataSplit split = make_synthetic_split(spec);
      const BasisConfig basis =
          time_feature_basis(key.order, config.normalize, spec.state_box, spec.time_box);
      const FitResult fit = fit_rls(split.train, basis, config.delta);
      const ErrorStats test = evaluate(fit.model, split.test);
      mean.train_mae += fit.report.train_mae;
      *mean.test_mae += test.mae;
      mean.gram_condition += fit.report.gram_condition;
      mean.residual_sup = std::max(mean.residual_sup, test.sup);
    }
    const double k = config.repeats;
    mean.train_mae /= k;
    *mean.test_mae /= k;
    mean.gram_condition /= k;
    cell.report = mean;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

std::vector<SweepCell> run_sweep(const SweepConfig& config, std::span<const SweepCellKey> cells,
                                 unsigned threads) {
  std::vector<SweepCell> results(cells.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, cells.size())));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      results[i] = run_cell(config, cells[i]);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace cdo

#include "cdo/error.hpp"
#include "cdo/learner.hpp"
#include "cdo/random.hpp"
#include "cdo/sim.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace cdo;

namespace {

ControlAffineDynamics zero_dynamics() {
  ControlAffineDynamics d;
  d.state_dim = 1;
  d.input_dim = 1;
  d.f_x = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()); };
  d.f_u = [](const Eigen::VectorXd& x) { return Eigen::MatrixXd::Zero(x.size(), 1); };
  return d;
}

TrajectoryDataset uniform_trajectory(std::size_t n, double t0, double t1,
                                     const std::function<double(double)>& x_of_t) {
  TrajectoryDataset d;
  d.t.resize(n);
  d.x.resize(static_cast<Eigen::Index>(n), 1);
  d.u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    d.t[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
    d.x(static_cast<Eigen::Index>(i), 0) = x_of_t(d.t[i]);
  }
  return d;
}

TrajectoryDataset in_span_data(const SeparatedModel& truth, std::size_t n, std::uint64_t seed) {
  auto rng = make_stream(seed, "test-in-span");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TrajectoryDataset d;
  d.t.resize(n);
  d.x.resize(static_cast<Eigen::Index>(n), truth.config().state_dim);
  d.u.resize(static_cast<Eigen::Index>(n), 0);
  for (std::size_t i = 0; i < n; ++i) {
    d.t[i] = u(rng);
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(static_cast<Eigen::Index>(i), j) = u(rng);
  }
  d.delta = truth.predict_batch(d);
  return d;
}

}  // namespace

TEST_CASE("targets: constant state gives zero disturbance") {
  const auto traj = uniform_trajectory(50, 0.0, 1.0, [](double) { return 3.0; });
  const auto out = targets_from_trajectory(traj, zero_dynamics(), 9, 3);
  CHECK(out.size() == 42);
  CHECK(out.delta->cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("targets: quadratic state gives exact derivative") {
  const auto traj = uniform_trajectory(101, 0.0, 2.0, [](double t) { return t * t; });
  const auto out = targets_from_trajectory(traj, zero_dynamics(), 5, 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(std::abs((*out.delta)(static_cast<Eigen::Index>(i), 0) - 2.0 * out.t[i]) < 1e-10);
  }
}

TEST_CASE("targets: insufficient data and bad windows") {
  const auto traj = uniform_trajectory(5, 0.0, 1.0, [](double t) { return t; });
  CHECK_THROWS_AS(targets_from_trajectory(traj, zero_dynamics(), 9, 3), DataError);
  CHECK_THROWS_AS(targets_from_trajectory(traj, zero_dynamics(), 4, 3), ConfigError);
  auto shuffled = uniform_trajectory(20, 0.0, 1.0, [](double t) { return t; });
  std::swap(shuffled.t[3], shuffled.t[4]);
  CHECK_THROWS_AS(targets_from_trajectory(shuffled, zero_dynamics(), 5, 2), DataError);
}

TEST_CASE("targets: noiseless Newton run recovers the disturbance") {
  ExcitationConfig ex;
  ex.samples = 10000;
  const auto traj = simulate_excitation_run(ex);
  const auto out = targets_from_trajectory(traj, newton_velocity_loop(1.0), 9, 3);
  double mae = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out.x(static_cast<Eigen::Index>(i), 0), t = out.t[i];
    mae += std::abs((*out.delta)(static_cast<Eigen::Index>(i), 0) - (-v * v + 50.0 - 10.0 * t - 0.5 * t * t));
  }
  mae /= static_cast<double>(out.size());
  CHECK(mae < 1e-6);
  CHECK(traj.x.col(0).minCoeff() >= -10.0);
  CHECK(traj.x.col(0).maxCoeff() <= 10.0);
}

TEST_CASE("fit_rls: degenerate inputs") {
  const BasisConfig c = time_feature_basis(2, false, {-1, 1}, {-1, 1});
  TrajectoryDataset empty;
  empty.x.resize(0, 1);
  empty.u.resize(0, 0);
  empty.delta = Eigen::MatrixXd(0, 1);
  CHECK_THROWS_AS(fit_rls(empty, c, 0.01), DataError);

  const SeparatedModel zero(c, Eigen::MatrixXd::Zero(1, 9));
  const auto data = in_span_data(zero, 30, 1);
  CHECK(fit_rls(data, c, 0.01).model.theta().norm() == 0.0);
  CHECK_THROWS_AS(fit_rls(data, c, 0.0), ConfigError);
  CHECK_THROWS_AS(fit_rls(data, c, -1.0), ConfigError);
}

TEST_CASE("fit_rls: in-span recovery, n = 1 and n = 2") {
  for (int n : {1, 2}) {
    BasisConfig c;
    c.order = 2;
    c.state_dim = n;
    std::mt19937_64 rng(7 + n);
    std::normal_distribution<double> g;
    Eigen::MatrixXd theta0(n, static_cast<Eigen::Index>(c.s1()));
    for (Eigen::Index j = 0; j < theta0.size(); ++j) theta0(j) = g(rng);
    const SeparatedModel truth(c, theta0);
    const auto data = in_span_data(truth, 500, static_cast<std::uint64_t>(n));
    const FitResult fit = fit_rls(data, c, 1e-9);
    CHECK((fit.model.theta() - theta0).norm() < 1e-6);
    CHECK(evaluate(fit.model, data).mae < 1e-8);
    CHECK(rls_gradient(fit.model, data, 1e-9).norm() / rls_gradient_scale(fit.model, data) < 1e-8);
  }
}

TEST_CASE("evaluate: definition and shrinkage limit") {
  const BasisConfig c = time_feature_basis(1, false, {-1, 1}, {-1, 1});
  auto data = in_span_data(SeparatedModel(c, Eigen::MatrixXd::Zero(1, 4)), 40, 3);
  data.delta = Eigen::MatrixXd::Constant(40, 1, -2.5);
  CHECK(evaluate(SeparatedModel(c, Eigen::MatrixXd::Zero(1, 4)), data).mae == doctest::Approx(2.5));

  const FitResult big = fit_rls(data, c, 1e9);
  CHECK(big.model.theta().norm() < 1e-6);
  CHECK(evaluate(big.model, data).mae == doctest::Approx(2.5).epsilon(1e-6));

  double previous = INFINITY;
  for (double delta : {1e-6, 1e-2, 1.0, 1e2, 1e4}) {
    const double norm = fit_rls(data, c, delta).model.theta().norm();
    CHECK(norm <= previous);
    previous = norm;
  }
}

TEST_CASE("synthetic split: sizes, noise only on training x, determinism") {
  SyntheticSpec spec;
  spec.samples = 1000;
  spec.noise_variance = 0.05;
  const DataSplit a = make_synthetic_split(spec);
  const DataSplit b = make_synthetic_split(spec);
  CHECK(a.train.size() == 500);
  CHECK(a.test.size() == 500);
  CHECK(a.train.x == b.train.x);
  CHECK(a.test.t == b.test.t);
  // Test targets are exact at the stored (clean) test inputs.
  const Disturbance f = find_disturbance(spec.function);
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    CHECK((*a.test.delta)(r, 0) == f.eval(a.test.x.row(r).transpose(), a.test.t[i])(0));
  }
  spec.noise_variance = 0.0;
  const DataSplit clean = make_synthetic_split(spec);
  const double var = (a.train.x - clean.train.x).squaredNorm() / 500.0;
  CHECK(var == doctest::Approx(0.05).epsilon(0.15));
}

TEST_CASE("training run marginals are uniform (KS at alpha = 0.01)") {
  int rejections = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = generate_training_run("sine_product", {-2, 2}, {0, 4}, 10000, seed);
    auto ks = [](std::vector<double> v, double lo, double hi) {
      std::sort(v.begin(), v.end());
      double worst = 0.0;
      const double n = static_cast<double>(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double cdf = (v[i] - lo) / (hi - lo);
        worst = std::max({worst, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
      }
      return worst * std::sqrt(n);
    };
    std::vector<double> xs(d.x.data(), d.x.data() + d.x.size());
    rejections += ks(xs, -2, 2) > 1.628;
    rejections += ks(d.t, 0, 4) > 1.628;
  }
  CHECK(rejections <= 1);
  const auto one = generate_training_run("cubic_quadratic", {-2, 2}, {0, 4}, 1, 9);
  CHECK(one.size() == 1);
  const double x = one.x(0, 0), t = one.t[0];
  CHECK((*one.delta)(0, 0) == doctest::Approx(x - x * x * x / 12.0 - t * t / 4.0));
}

TEST_CASE("test error grows with training noise on average") {
  SweepConfig cfg;
  cfg.functions = {"sine_product"};
  cfg.orders = {3};
  cfg.noise_variances = {0.0, 0.01, 0.05, 0.1};
  cfg.data.samples = 2000;
  cfg.repeats = 5;
  const auto cells = run_sweep(cfg, sweep_grid(cfg), 1);
  for (std::size_t i = 1; i < cells.size(); ++i) {
    REQUIRE(cells[i].report);
    CHECK(*cells[i].report->test_mae >= *cells[i - 1].report->test_mae);
  }
}

TEST_CASE("sweep results do not depend on thread count") {
  SweepConfig cfg;
  cfg.functions = {"sine_product", "sine_cubic"};
  cfg.orders = {1, 4};
  cfg.noise_variances = {0.0, 0.05};
  cfg.data.samples = 600;
  const auto grid = sweep_grid(cfg);
  const auto one = run_sweep(cfg, grid, 1);
  const auto four = run_sweep(cfg, grid, 4);
  REQUIRE(one.size() == 8);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].key.function == four[i].key.function);
    CHECK(*one[i].report->test_mae == *four[i].report->test_mae);
  }
  SweepConfig bad = cfg;
  bad.functions = {"no_such_function"};
  const auto failed = run_sweep(bad, sweep_grid(bad), 2);
  CHECK_FALSE(failed[0].report);
  CHECK_FALSE(failed[0].error.empty());
}

TEST_CASE("predict_batch matches pointwise prediction") {
  const BasisConfig c = time_feature_basis(3, true, {-2, 2}, {0, 4});
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::MatrixXd theta(1, 16);
  for (auto& v : theta.reshaped()) v = g(rng);
  const SeparatedModel m(c, theta);
  const auto d = generate_training_run("sine_product", {-2, 2}, {0, 4}, 50, 1);
  const Eigen::MatrixXd batch = m.predict_batch(d);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    CHECK(batch(r, 0) == doctest::Approx(m.predict(d.x.row(r).transpose(), d.t[i])(0)).epsilon(1e-12));
  }
  // The output map reproduces the prediction through the monomial vector.
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.7);
  const double t = 1.3;
  const double via_c = (m.output_map(x) * m.basis().monomial_vector(t))(0);
  CHECK(via_c == doctest::Approx(m.predict(x, t)(0)).epsilon(1e-12));
}

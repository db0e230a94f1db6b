#include "cdo/error.hpp"
#include "cdo/observer.hpp"
#include "cdo/sim.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cdo;

namespace {

SeparatedModel newton_model() {
  return SeparatedModel(time_feature_basis(2, false, {-10, 10}, {0, 100}),
                        oracle::newton_theta_analytic());
}

SeparatedModel constant_model(double c) {
  return SeparatedModel(time_feature_basis(0, false, {-10, 10}, {0, 100}),
                        Eigen::MatrixXd::Constant(1, 1, c));
}

HodoOptions options(Poles poles) {
  HodoOptions o;
  o.poles = std::move(poles);
  return o;
}

}  // namespace

TEST_CASE("scalar placement") {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::RowVectorXd c = Eigen::RowVectorXd::Constant(1, 2.5);
  const Eigen::VectorXd g = design_gain(A, c, {-0.8});
  CHECK(g(0) == doctest::Approx(0.8 / 2.5));
}

TEST_CASE("zero output row is unobservable") {
  const Eigen::MatrixXd A = structure_matrices(3).A;
  CHECK_THROWS_AS(design_gain(A, Eigen::RowVectorXd::Zero(3), {-1, -2, -3}), Unobservable);
  CHECK_THROWS_AS(design_gain(A, Eigen::RowVector3d(1, 0, 0), {-1, -2, -3}), Unobservable);
  CHECK_THROWS_AS(design_gain(A, Eigen::RowVector3d(1, 0, 1e-9), {-1, -2, -3}, 1e8), Unobservable);
  CHECK_THROWS_AS(design_gain(A, Eigen::RowVector3d(1, 1, 1), {-1, 2, -3}), std::invalid_argument);
  CHECK_THROWS_AS(design_gain(A, Eigen::RowVector3d(1, 1, 1), {-1, -3}), std::invalid_argument);
}

TEST_CASE("triple pole placement") {
  const Eigen::MatrixXd A = structure_matrices(3).A;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int i = 0; i < 100; ++i) {
    Eigen::RowVectorXd c(3);
    for (auto& v : c) v = g(rng);
    Eigen::VectorXd gamma;
    try {
      gamma = design_gain(A, c, {-0.4, -0.4, -0.4}, 1e3);
    } catch (const Unobservable&) {
      continue;
    }
    const Eigen::MatrixXd closed = A - gamma * c;
    // (s + 0.4)^3 = s^3 + 1.2 s^2 + 0.48 s + 0.064
    CHECK(std::abs(closed.trace() + 1.2) < 1e-9);
    CHECK(std::abs(closed.determinant() + 0.064) < 1e-9);
    const double minors = closed(0, 0) * closed(1, 1) - closed(0, 1) * closed(1, 0) +
                          closed(0, 0) * closed(2, 2) - closed(0, 2) * closed(2, 0) +
                          closed(1, 1) * closed(2, 2) - closed(1, 2) * closed(2, 1);
    CHECK(std::abs(minors - 0.48) < 1e-9);
    // A triple eigenvalue is only resolvable to about eps^(1/3).
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(closed).eigenvalues();
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(std::abs(eig(k) - (-0.4)) < 1e-4);
  }
}

TEST_CASE("distinct pole placement matches eigenvalues") {
  const Eigen::MatrixXd A = structure_matrices(4).A;
  const Poles poles{-1.0, -2.0, {-0.5, 0.7}, {-0.5, -0.7}};
  const Eigen::RowVector4d c(1.0, 0.3, -0.2, 0.5);
  const Eigen::VectorXd gamma = design_gain(A, c, poles);
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(A - gamma * c).eigenvalues();
  CHECK(oracle::spectrum_distance(eig, poles) < 1e-8);
}

TEST_CASE("monic and characteristic polynomials") {
  CHECK(monic_polynomial({-1.0, -2.0}) == Eigen::Vector3d(1, 3, 2));
  CHECK_THROWS_AS(monic_polynomial({{-1.0, 1.0}}), std::invalid_argument);
  Eigen::Matrix2d m;
  m << 0, 1, -2, -3;
  const Eigen::VectorXd p = characteristic_polynomial(m);
  CHECK((p - Eigen::Vector3d(1, 3, 2)).norm() < 1e-14);
}

TEST_CASE("observer construction errors name the field") {
  const auto loop = newton_velocity_loop(1.0);
  auto field_of = [&](HodoOptions o) {
    try {
      HigherOrderObserver(newton_model(), loop, std::move(o));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  CHECK(field_of({{-0.4, -0.4}, 1e8, {}, false}) == "observer.poles");
  CHECK(field_of({{-0.4, 0.4, -0.4}, 1e8, {}, false}) == "observer.poles");
  CHECK(field_of({{-0.4, -0.4, -0.4}, 0.5, {}, false}) == "observer.cond_limit");
  CHECK(field_of({{-0.4, -0.4, -0.4}, 1e8, Eigen::VectorXd::Zero(1), false}) == "observer.output_weights");
  CHECK(field_of({{-0.4, -0.4, -0.4}, 1e8, {}, false}).empty());
}

TEST_CASE("init: zero guess gives z = -Gamma x0 and the invariant holds") {
  const HigherOrderObserver obs(newton_model(), newton_velocity_loop(1.0), options({-0.4, -0.4, -0.4}));
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 1.7);
  const HodoState s = obs.init(x0);
  CHECK(s.sigma_hat.isZero(0.0));
  CHECK((s.z + s.gamma * x0).cwiseAbs().maxCoeff() < 1e-12);
  const HodoStep next = obs.step(s, Eigen::VectorXd::Constant(1, 1.9), Eigen::VectorXd::Constant(1, 0.3), 1e-3);
  CHECK((next.state.sigma_hat - (next.state.z + next.state.gamma * Eigen::VectorXd::Constant(1, 1.9))).norm() < 1e-12);
}

namespace {

// Sup |Delta - Delta_hat| over 20 s of the Newton loop, exact model, exact varsigma(0).
double exact_model_sup_error(double dt) {
  const SeparatedModel model = newton_model();
  const HigherOrderObserver obs(model, newton_velocity_loop(1.0), {{-0.4, -0.4, -0.4}, 1e8, Eigen::VectorXd(), true});
  Eigen::VectorXd v = Eigen::VectorXd::Zero(1);
  HodoState s = obs.init(v, Eigen::Vector3d(1, 0, 0));
  double worst = 0.0;
  const int steps = static_cast<int>(std::lround(20.0 / dt));
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const double delta_hat = obs.estimate(s, v)(0);
    const double delta = -v(0) * v(0) + 50.0 - 10.0 * t - 0.5 * t * t;
    worst = std::max(worst, std::abs(delta - delta_hat));
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, -delta_hat);
    s = obs.step(std::move(s), v, u, dt).state;
    CHECK(s.placement_error <= 1e-8);
    auto field = [&](double tau, const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return Eigen::VectorXd::Constant(1, u(0) - x(0) * x(0) + 50.0 - 10.0 * tau - 0.5 * tau * tau);
    };
    v = rk4_step(field, v, t, dt);
  }
  return worst;
}

// RK4 amplification of y' = -lambda y over one step.
double rk4_factor(double a) { return 1.0 - a + a * a / 2.0 - a * a * a / 6.0 + a * a * a * a / 24.0; }

}  // namespace

TEST_CASE("exact model and exact initial guess: error vanishes as dt^2") {
  // Holding x over a step leaves a small departure from the zero-error manifold.
  const double coarse = exact_model_sup_error(1e-3);
  const double fine = exact_model_sup_error(5e-4);
  CHECK(coarse < 1e-5);
  CHECK(coarse / fine > 3.5);
}

TEST_CASE("constant disturbance error decays like exp(pole t)") {
  const double c = 3.0, lambda = 0.4, dt = 0.01;
  const HigherOrderObserver obs(constant_model(c), newton_velocity_loop(1.0), options({-lambda}));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  HodoState s = obs.init(x);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
  const double a = lambda * dt, r = rk4_factor(a);
  double expected = c;  // sampled-data recurrence e' = r e + c (1 - r - a)
  for (int k = 1; k <= 1000; ++k) {
    s = obs.step(std::move(s), x, u, dt).state;
    x(0) = c * k * dt;
    const double err = c - obs.estimate(s, x)(0);
    expected = r * expected + c * (1.0 - r - a);
    CHECK(err == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(err - c * std::exp(-lambda * k * dt)) <= c * a);
  }
}

TEST_CASE("first-order observer: constant and ramp disturbances") {
  const double gain = 0.4;
  const FirstOrderObserver ndo(newton_velocity_loop(1.0), gain);
  CHECK_THROWS_AS(FirstOrderObserver(newton_velocity_loop(1.0), 0.0), ConfigError);
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);

  double dt = 0.01;
  double a = gain * dt, r = rk4_factor(a);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  NdoState s = ndo.init(x);
  for (int k = 1; k <= 10000; ++k) {
    s = ndo.step(s, x, u, dt).first;
    x(0) = 2.0 * k * dt;
  }
  CHECK(ndo.estimate(s, x)(0) == doctest::Approx(2.0 * a / (1.0 - r)).epsilon(1e-9));
  CHECK(std::abs(ndo.estimate(s, x)(0) - 2.0) <= 2.0 * a);

  const double ramp = 1.5;
  dt = 1e-3;
  a = gain * dt;
  r = rk4_factor(a);
  x.setZero();
  s = ndo.init(x);
  double t = 0.0, recurrence = 0.0;
  for (int k = 1; k <= 40000; ++k) {
    s = ndo.step(s, x, u, dt).first;
    const double x_prev = x(0);
    t = k * dt;
    x(0) = 0.5 * ramp * t * t;
    recurrence = r * recurrence + gain * (x(0) - x_prev);
  }
  const double estimate = ndo.estimate(s, x)(0);
  CHECK(estimate == doctest::Approx(recurrence).epsilon(1e-9));
  CHECK(ramp * t - estimate == doctest::Approx(ramp / gain).epsilon(0.01));
}

TEST_CASE("gain falls back to the last good value when unobservable") {
  // Theta chosen so that the output row loses rank at v = 0.
  Eigen::RowVectorXd theta = Eigen::RowVectorXd::Zero(9);
  theta(1) = 1.0;
  theta(4) = 1.0;
  theta(7) = 1.0;
  const SeparatedModel m(time_feature_basis(2, false, {-10, 10}, {0, 100}), theta);
  const HigherOrderObserver obs(m, newton_velocity_loop(1.0), options({-1, -1, -1}));
  HodoState s = obs.init(Eigen::VectorXd::Constant(1, 1.0));
  CHECK_THROWS_AS(obs.gain(Eigen::VectorXd::Zero(1)), Unobservable);
  const auto step = obs.step(s, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1e-3);
  CHECK(step.state.gain_fallback);
  CHECK(step.state.fallback_count == 1);
  CHECK(step.state.gamma == s.last_good_gamma);
}

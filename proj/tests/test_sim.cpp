#include "cdo/error.hpp"
#include "cdo/integrate.hpp"
#include "cdo/sim.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace cdo;

namespace {

SeparatedModel newton_model() {
  return SeparatedModel(time_feature_basis(2, false, {-10, 10}, {0, 100}),
                        oracle::newton_theta_analytic());
}

}  // namespace

TEST_CASE("rk4 basics") {
  auto zero = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(x.size()); };
  const Eigen::VectorXd x0 = Eigen::Vector2d(1.5, -2.0);
  CHECK(rk4_step(zero, x0, 0.0, 0.1) == x0);

  auto grow = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; };
  CHECK(std::abs(rk4_step(grow, Eigen::VectorXd::Ones(1), 0.0, 0.1)(0) - std::exp(0.1)) < 1e-7);

  CHECK_THROWS_AS(rk4_step(grow, x0, 0.0, 0.0), IntegrationError);
  auto blow = [](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(x.size(), NAN);
  };
  CHECK_THROWS_AS(rk4_step(blow, x0, 0.0, 0.1), IntegrationError);
}

TEST_CASE("rk4 global error is fourth order on x' = cos t") {
  auto f = [](double t, const Eigen::VectorXd&) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(1, std::cos(t)); };
  auto error = [&](double h) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    const int n = static_cast<int>(std::lround(3.0 / h));
    for (int k = 0; k < n; ++k) x = rk4_step(f, x, k * h, h);
    return std::abs(x(0) - std::sin(3.0));
  };
  const double r = error(0.1) / error(0.05);
  CHECK(r > 14.0);
  CHECK(r < 18.0);
}

TEST_CASE("pd control") {
  CHECK(pd_control(0, 0, 0, 0, 10, 25, 0) == 0.0);
  CHECK(pd_control(0, 0, 1, 0, 10, 25, 0) == 10.0);
  CHECK(pd_control(0.5, 0.1, 1, 0.3, 10, 25, 2.0) == doctest::Approx(10 * 0.5 + 25 * 0.2 - 2.0));
  // Error dynamics m e'' + K_v e' + K_eta e = 0 are stable.
  Eigen::Matrix2d closed;
  closed << 0, 1, -10.0, -25.0;
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::Matrix2d>(closed).eigenvalues();
  CHECK(eig(0).real() < 0.0);
  CHECK(eig(1).real() < 0.0);
}

TEST_CASE("scenario config validation names fields") {
  ScenarioConfig c;
  auto field_of = [](const ScenarioConfig& cfg) {
    try {
      cfg.validate();
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string();
  };
  CHECK(field_of(c).empty());
  c.dt = 0.0;
  CHECK(field_of(c) == "scenario.dt");
  c = {};
  c.mass = -1;
  CHECK(field_of(c) == "scenario.mass");
  c = {};
  c.disturbance = "bogus";
  CHECK(field_of(c) == "function");
  c = {};
  CHECK_THROWS_AS(run_scenario(c, nullptr), ConfigError);
  CHECK(parse_compensation("hodo") == Compensation::Hodo);
  CHECK_THROWS_AS(parse_compensation("pid"), ConfigError);
}

TEST_CASE("no disturbance and no compensation: tracking at the nominal floor") {
  ScenarioConfig c;
  c.disturbance = "poly:0:0:0";
  c.mode = Compensation::None;
  c.v0 = c.reference.velocity(0.0);
  c.noise_variance = 0.0;
  const ScenarioResult clean = run_scenario(c);
  CHECK(clean.failure.empty());
  CHECK(clean.size() == 20001);
  // PD without acceleration feedforward: |eta_d''| / K_eta bounds the lag.
  CHECK(clean.metrics.tracking_mae < 0.025);
  c.noise_variance = 0.1;
  const ScenarioResult noisy = run_scenario(c);
  CHECK(noisy.metrics.tracking_mae < 0.05);
}

TEST_CASE("Newton scenario: learned-quality model estimates accurately") {
  const SeparatedModel model = newton_model();
  ScenarioConfig c;
  c.noise_variance = 0.0;
  c.mode = Compensation::Hodo;
  const ScenarioResult hodo = run_scenario(c, &model);
  c.mode = Compensation::Ndo;
  const ScenarioResult ndo = run_scenario(c, &model);
  c.mode = Compensation::None;
  const ScenarioResult none = run_scenario(c, &model);

  const auto [lo, hi] = std::minmax_element(hodo.delta_true.begin(), hodo.delta_true.end());
  const double range = *hi - *lo;
  CHECK(hodo.metrics.steady_estimation_mae < 0.01 * range);
  CHECK(hodo.metrics.tracking_mae < ndo.metrics.tracking_mae);
  CHECK(ndo.metrics.tracking_mae < none.metrics.tracking_mae);

  // The first-order observer lags a decreasing disturbance from above.
  std::size_t above = 0, count = 0;
  for (std::size_t k = 0; k < ndo.size(); ++k) {
    if (ndo.t[k] < 10.0) continue;
    ++count;
    above += ndo.delta_hat[k] > ndo.delta_true[k];
  }
  CHECK(above > 0.95 * static_cast<double>(count));
  CHECK(ndo.metrics.steady_estimation_mae > 5.0 * hodo.metrics.steady_estimation_mae);
}

TEST_CASE("scenario runs are deterministic and modes use separate noise streams") {
  const SeparatedModel model = newton_model();
  ScenarioConfig c;
  c.duration = 2.0;
  c.mode = Compensation::Hodo;
  c.verbose = true;
  const ScenarioResult a = run_scenario(c, &model);
  const ScenarioResult b = run_scenario(c, &model);
  CHECK(a.v == b.v);
  CHECK(a.delta_hat == b.delta_hat);
  CHECK(a.sigma_hat.size() == a.size());
  c.seed = 2;
  CHECK(run_scenario(c, &model).v != a.v);
}

TEST_CASE("metrics of a hand-made series") {
  ScenarioResult r;
  for (int k = 0; k <= 10; ++k) {
    const double t = k;
    r.t.push_back(t);
    r.eta.push_back(0.0);
    r.eta_d.push_back(1.0);
    r.delta_true.push_back(std::exp(-0.5 * t));
    r.delta_hat.push_back(0.0);
  }
  const ScenarioMetrics m = compute_metrics(r, {2.0, 8.0}, {5.0, 10.0});
  CHECK(m.tracking_mae == doctest::Approx(1.0));
  CHECK(m.decay_rate == doctest::Approx(-0.5).epsilon(1e-9));
}

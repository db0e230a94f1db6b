#include "cdo/sim.hpp"

#include "cdo/error.hpp"
#include "cdo/random.hpp"

#include <cmath>
#include <random>
#include <string>

namespace cdo {

std::string_view to_string(Compensation mode) {
  switch (mode) {
    case Compensation::None: return "none";
    case Compensation::Ndo: return "ndo";
    case Compensation::Hodo: return "hodo";
  }
  return "none";
}

Compensation parse_compensation(std::string_view name) {
  if (name == "none") return Compensation::None;
  if (name == "ndo") return Compensation::Ndo;
  if (name == "hodo") return Compensation::Hodo;
  throw ConfigError("scenario.modes", "unknown compensation mode '" + std::string(name) + "'");
}

double pd_control(double eta, double v, double eta_d, double eta_d_dot, double k_eta, double k_v,
                  double delta_hat) {
  return k_eta * (eta_d - eta) + k_v * (eta_d_dot - v) - delta_hat;
}

double SineReference::position(double t) const { return amplitude * std::sin(frequency * t); }

double SineReference::velocity(double t) const {
  return amplitude * frequency * std::cos(frequency * t);
}

void ScenarioConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be positive");
  };
  if (plant != "newton") throw ConfigError("scenario.plant", "only 'newton' is available");
  find_disturbance(disturbance);
  positive(mass, "scenario.mass");
  positive(k_eta, "scenario.k_eta");
  positive(k_v, "scenario.k_v");
  positive(dt, "scenario.dt");
  positive(duration, "scenario.duration");
  if (dt > duration) throw ConfigError("scenario.dt", "must not exceed the duration");
  if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
    throw ConfigError("scenario.noise_variance", "must be non-negative");
  }
  if (!std::isfinite(reference.amplitude) || !std::isfinite(reference.frequency)) {
    throw ConfigError("scenario.reference", "must be finite");
  }
  if (!std::isfinite(eta0) || !std::isfinite(v0)) {
    throw ConfigError("scenario.initial_state", "must be finite");
  }
  if (mode == Compensation::Ndo) positive(ndo_gain, "observer.ndo_gain");
  if (mode == Compensation::Hodo) {
    for (const auto& pole : poles) {
      if (!(pole.real() < 0.0)) throw ConfigError("observer.poles", "must have negative real parts");
    }
  }
  if (!(decay_window.lo < decay_window.hi)) throw ConfigError("scenario.decay_window", "lo < hi");
  if (!(steady_window.lo < steady_window.hi)) throw ConfigError("scenario.steady_window", "lo < hi");
}

ControlAffineDynamics newton_velocity_loop(double mass) { return scaled_integrator(1, mass); }

ScenarioMetrics compute_metrics(const ScenarioResult& result, Interval decay_window,
                                Interval steady_window) {
  ScenarioMetrics m;
  const std::size_t n = result.size();
  if (n == 0) return m;
  double track = 0.0;
  double est = 0.0;
  double steady = 0.0;
  std::size_t steady_count = 0;
  // least-squares line through (t, log|err|)
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::size_t fit_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = std::abs(result.delta_true[i] - result.delta_hat[i]);
    track += std::abs(result.eta_d[i] - result.eta[i]);
    est += err;
    const double t = result.t[i];
    if (t >= steady_window.lo && t <= steady_window.hi) {
      steady += err;
      ++steady_count;
    }
    if (t >= decay_window.lo && t <= decay_window.hi && err > 0.0) {
      const double y = std::log(err);
      st += t;
      sy += y;
      stt += t * t;
      sty += t * y;
      ++fit_count;
    }
  }
  m.tracking_mae = track / static_cast<double>(n);
  m.estimation_mae = est / static_cast<double>(n);
  m.steady_estimation_mae = steady_count ? steady / static_cast<double>(steady_count) : NAN;
  if (fit_count >= 2) {
    const double k = static_cast<double>(fit_count);
    m.decay_rate = (k * sty - st * sy) / (k * stt - st * st);
  } else {
    m.decay_rate = NAN;
  }
  return m;
}

ScenarioResult run_scenario(const ScenarioConfig& config, const SeparatedModel* model) {
  config.validate();
  const Disturbance disturbance = find_disturbance(config.disturbance);
  const ControlAffineDynamics loop = newton_velocity_loop(config.mass);

  std::optional<HigherOrderObserver> hodo;
  std::optional<FirstOrderObserver> ndo;
  if (config.mode == Compensation::Hodo) {
    if (model == nullptr) throw ConfigError("scenario.model", "hodo mode needs a learned model");
    hodo.emplace(*model, loop, HodoOptions{config.poles, config.cond_limit, {}, false});
  } else if (config.mode == Compensation::Ndo) {
    ndo.emplace(loop, config.ndo_gain);
  }

  auto noise_rng = make_stream(config.seed, "measurement-noise",
                               static_cast<std::uint64_t>(config.mode));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = std::sqrt(config.noise_variance);
  const auto steps = static_cast<std::size_t>(std::llround(config.duration / config.dt));

  ScenarioResult result;
  result.mode = config.mode;
  for (auto* series : {&result.t, &result.eta, &result.eta_d, &result.v, &result.u,
                       &result.delta_true, &result.delta_hat}) {
    series->reserve(steps + 1);
  }

  Eigen::VectorXd plant(2);
  plant << config.eta0, config.v0;
  HodoState hodo_state;
  NdoState ndo_state;

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    const double v_meas = plant(1) + sigma * normal(noise_rng);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, v_meas);

    // Observers estimate Delta / m, the disturbance of the velocity loop.
    double delta_hat = 0.0;
    if (hodo) {
      if (k == 0) hodo_state = hodo->init(x);
      delta_hat = config.mass * hodo->estimate(hodo_state, x)(0);
    } else if (ndo) {
      if (k == 0) ndo_state = ndo->init(x);
      delta_hat = config.mass * ndo->estimate(ndo_state, x)(0);
    }

    const double eta_d = config.reference.position(t);
    const double u = pd_control(plant(0), v_meas, eta_d, config.reference.velocity(t),
                                config.k_eta, config.k_v, delta_hat);
    const double delta_true = disturbance.eval(plant.tail(1), t)(0);

    result.t.push_back(t);
    result.eta.push_back(plant(0));
    result.eta_d.push_back(eta_d);
    result.v.push_back(plant(1));
    result.u.push_back(u);
    result.delta_true.push_back(delta_true);
    result.delta_hat.push_back(delta_hat);
    if (config.verbose && hodo) result.sigma_hat.push_back(hodo_state.z + hodo_state.gamma * x);

    if (k == steps) break;

    try {
      const Eigen::VectorXd uv = Eigen::VectorXd::Constant(1, u);
      if (hodo) {
        hodo_state = hodo->step(std::move(hodo_state), x, uv, config.dt).state;
        if (hodo_state.gain_fallback) ++result.gain_fallbacks;
      } else if (ndo) {
        ndo_state = ndo->step(std::move(ndo_state), x, uv, config.dt).first;
      }
      auto field = [&](double tau, const Eigen::VectorXd& s) -> Eigen::VectorXd {
        Eigen::VectorXd ds(2);
        ds(0) = s(1);
        ds(1) = (u + disturbance.eval(s.tail(1), tau)(0)) / config.mass;
        return ds;
      };
      plant = rk4_step(field, plant, t, config.dt);
    } catch (const NumericalError& e) {
      result.failure = e.what();
      break;
    } catch (const DataError& e) {
      result.failure = e.what();
      break;
    }
  }
  result.metrics = compute_metrics(result, config.decay_window, config.steady_window);
  return result;
}

TrajectoryDataset generate_training_run(std::string_view function, Interval state_box,
                                        Interval time_box, std::size_t samples,
                                        std::uint64_t seed, std::uint64_t index) {
  if (samples == 0) throw ConfigError("learning.samples", "must be at least 1");
  if (!(state_box.lo < state_box.hi)) throw ConfigError("learning.state_box", "empty range");
  if (!(time_box.lo < time_box.hi)) throw ConfigError("learning.time_box", "empty range");
  const Disturbance dist = find_disturbance(function);

  auto rng = make_stream(seed, "training-samples", index);
  std::uniform_real_distribution<double> ux(state_box.lo, state_box.hi);
  std::uniform_real_distribution<double> ut(time_box.lo, time_box.hi);

  TrajectoryDataset data;
  const auto n = static_cast<Eigen::Index>(samples);
  data.t.resize(samples);
  data.x.resize(n, 1);
  data.u.resize(n, 0);
  data.delta = Eigen::MatrixXd(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.x(i, 0) = ux(rng);
    data.t[static_cast<std::size_t>(i)] = ut(rng);
    (*data.delta)(i, 0) = dist.eval(data.x.row(i).transpose(), data.t[static_cast<std::size_t>(i)])(0);
  }
  return data;
}

TrajectoryDataset simulate_excitation_run(const ExcitationConfig& config) {
  if (config.samples < 2) throw ConfigError("learning.samples", "need at least 2 samples");
  if (config.substeps < 1) throw ConfigError("learning.substeps", "must be at least 1");
  if (!(config.mass > 0.0)) throw ConfigError("scenario.mass", "must be positive");
  const Disturbance dist = find_disturbance(config.disturbance);

  const double mid = 0.5 * (config.velocity_box.lo + config.velocity_box.hi);
  const double half = 0.5 * (config.velocity_box.hi - config.velocity_box.lo);
  const double a1 = 0.6 * half, w1 = 0.31, a2 = 0.35 * half, w2 = 1.13;
  auto v_ref = [&](double t) { return mid + a1 * std::sin(w1 * t) + a2 * std::sin(w2 * t); };
  auto v_ref_dot = [&](double t) { return a1 * w1 * std::cos(w1 * t) + a2 * w2 * std::cos(w2 * t); };
  // Continuous-time tracking law with exact cancellation; u stays smooth in t
  // so the recorded (t, v, u) satisfy the plant equation pointwise.
  constexpr double kTrack = 5.0;
  auto control = [&](double t, double v) {
    const Eigen::VectorXd vv = Eigen::VectorXd::Constant(1, v);
    return config.mass * (v_ref_dot(t) + kTrack * (v_ref(t) - v)) - dist.eval(vv, t)(0);
  };
  auto field = [&](double t, const Eigen::VectorXd& s) -> Eigen::VectorXd {
    const Eigen::VectorXd vv = s;
    return Eigen::VectorXd::Constant(1, (control(t, s(0)) + dist.eval(vv, t)(0)) / config.mass);
  };

  const double span = config.time_box.hi - config.time_box.lo;
  const double sample_dt = span / static_cast<double>(config.samples - 1);
  const double dt = sample_dt / config.substeps;

  auto rng = make_stream(config.seed, "excitation-noise", 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = std::sqrt(config.noise_variance);

  TrajectoryDataset data;
  const auto n = static_cast<Eigen::Index>(config.samples);
  data.t.resize(config.samples);
  data.x.resize(n, 1);
  data.u.resize(n, 1);
  Eigen::VectorXd state = Eigen::VectorXd::Constant(1, v_ref(config.time_box.lo));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = config.time_box.lo + static_cast<double>(i) * sample_dt;
    data.t[static_cast<std::size_t>(i)] = t;
    data.x(i, 0) = state(0) + sigma * normal(rng);
    data.u(i, 0) = control(t, state(0));
    if (i + 1 == n) break;
    for (int s = 0; s < config.substeps; ++s) {
      state = rk4_step(field, state, t + s * dt, dt);
    }
  }
  return data;
}

}  // namespace cdo

#pragma once

// Closed-loop simulation of the Newton plant
//
//   eta' = v,   m v' = u + Delta(v, t)
//
// under PD + disturbance-feedforward control, with measured v corrupted by
// Gaussian noise and Delta estimated by the HODO, the first-order baseline,
// or not at all.

#include "cdo/disturbances.hpp"
#include "cdo/integrate.hpp"
#include "cdo/learner.hpp"
#include "cdo/observer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdo {

enum class Compensation { None, Ndo, Hodo };

std::string_view to_string(Compensation mode);
/// Throws ConfigError("scenario.modes").
Compensation parse_compensation(std::string_view name);

/// u = K_eta (eta_d - eta) + K_v (eta_d' - v) - delta_hat
double pd_control(double eta, double v, double eta_d, double eta_d_dot, double k_eta, double k_v,
                  double delta_hat);

/// eta_d = amplitude * sin(frequency * t); the derivative is analytic.
struct SineReference {
  double amplitude = 1.0;
  double frequency = 0.5;
  double position(double t) const;
  double velocity(double t) const;
};

struct ScenarioConfig {
  std::string plant = "newton";
  std::string disturbance = "newton";
  double mass = 1.0;
  double k_eta = 10.0;
  double k_v = 25.0;
  SineReference reference;
  double noise_variance = 0.1;  // on measured v
  double dt = 0.001;
  double duration = 20.0;
  double eta0 = 0.0;
  double v0 = 0.0;
  Compensation mode = Compensation::Hodo;
  Poles poles{-0.4, -0.4, -0.4};
  double cond_limit = 1e8;
  double ndo_gain = 0.4;
  std::uint64_t seed = 1;
  bool verbose = false;
  Interval decay_window{2.0, 10.0};
  Interval steady_window{10.0, 20.0};

  /// Throws ConfigError naming the field.
  void validate() const;
};

struct ScenarioMetrics {
  double tracking_mae = 0.0;          // mean |eta_d - eta|
  double estimation_mae = 0.0;        // mean |Delta - Delta_hat|
  double steady_estimation_mae = 0.0; // same, over steady_window
  double decay_rate = 0.0;            // slope of log|Delta - Delta_hat| over decay_window
};

struct ScenarioResult {
  Compensation mode = Compensation::None;
  std::vector<double> t, eta, eta_d, v, u, delta_true, delta_hat;
  std::vector<Eigen::VectorXd> sigma_hat;  // verbose HODO runs only
  std::size_t gain_fallbacks = 0;
  std::string failure;  // set when integration aborted; series are partial
  ScenarioMetrics metrics;

  std::size_t size() const { return t.size(); }
};

ScenarioMetrics compute_metrics(const ScenarioResult& result, Interval decay_window,
                                Interval steady_window);

/// `model` is required for Compensation::Hodo (ConfigError otherwise).
ScenarioResult run_scenario(const ScenarioConfig& config, const SeparatedModel* model = nullptr);

/// Velocity loop of the plant, x = v: x' = u / m + Delta / m.
ControlAffineDynamics newton_velocity_loop(double mass);

/// Uniform samples of (x, t) over the boxes with exact registry targets.
TrajectoryDataset generate_training_run(std::string_view function, Interval state_box,
                                        Interval time_box, std::size_t samples,
                                        std::uint64_t seed, std::uint64_t index = 0);

struct ExcitationConfig {
  std::string disturbance = "newton";
  double mass = 1.0;
  Interval velocity_box{-10.0, 10.0};
  Interval time_box{0.0, 100.0};
  std::size_t samples = 10000;
  int substeps = 10;           // RK4 steps per sample interval
  double noise_variance = 0.0; // on recorded v
  std::uint64_t seed = 1;
};

/// Records (t, v, u) from the plant driven to sweep the velocity box with a
/// two-tone velocity reference; targets are left empty for
/// targets_from_trajectory.
TrajectoryDataset simulate_excitation_run(const ExcitationConfig& config);

}  // namespace cdo

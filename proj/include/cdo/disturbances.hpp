#pragma once

// Registry of coupled disturbances Delta(x, t) used for synthetic data and
// as the ground truth in closed-loop scenarios.
//
//   sine_product     sin(x) sin(t)
//   cubic_quadratic  x - x^3/12 - t^2/4
//   sine_cubic       -sin(x) t^3 / 9
//   newton           -v^2 + 50 - 10 t - 0.5 t^2
//   poly:c:a:b[,c:a:b...]    sum of c * x^a * t^b
//   trig:amp:wx:wt           amp * sin(wx x) * sin(wt t)
//
// All registered functions are scalar-state (n = 1).

#include "cdo/basis.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace cdo {

struct Disturbance {
  std::string name;
  int state_dim = 1;
  Interval state_box;  // default sampling range
  Interval time_box;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, double t)> eval;
};

/// Throws ConfigError("function") for unknown names or malformed parameters.
Disturbance find_disturbance(std::string_view name);

std::vector<std::string> builtin_disturbances();

}  // namespace cdo

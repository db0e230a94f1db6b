#pragma once

#include <Eigen/Dense>

#include <functional>

namespace cdo {

/// Known part of a control-affine system x' = f_x(x) + f_u(x) u + Delta.
struct ControlAffineDynamics {
  int state_dim = 1;
  int input_dim = 1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f_x;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> f_u;

  /// f_x(x) + f_u(x) u
  Eigen::VectorXd nominal(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

/// x' = u / mass + Delta, the velocity loop of a Newton plant.
ControlAffineDynamics scaled_integrator(int dim, double mass);

}  // namespace cdo

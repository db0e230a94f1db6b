#include "cdo/dynamics.hpp"

namespace cdo {

Eigen::VectorXd ControlAffineDynamics::nominal(const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = f_x(x);
  if (input_dim > 0) out += f_u(x) * u;
  return out;
}

ControlAffineDynamics scaled_integrator(int dim, double mass) {
  ControlAffineDynamics d;
  d.state_dim = dim;
  d.input_dim = dim;
  d.f_x = [dim](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dim).eval(); };
  d.f_u = [dim, mass](const Eigen::VectorXd&) {
    return (Eigen::MatrixXd::Identity(dim, dim) / mass).eval();
  };
  return d;
}

}  // namespace cdo

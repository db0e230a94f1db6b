#pragma once

#include "cdo/error.hpp"

#include <Eigen/Dense>

#include <string>

namespace cdo {

/// Classical fourth-order Runge-Kutta step of x' = f(t, x).
/// Throws IntegrationError if any stage or the result is non-finite.
template <class Field>
Eigen::VectorXd rk4_step(Field&& f, const Eigen::VectorXd& x, double t, double dt) {
  if (!(dt > 0.0)) throw IntegrationError("rk4_step: dt must be positive");
  auto check = [&](const Eigen::VectorXd& v, const char* stage) {
    if (!v.allFinite()) {
      throw IntegrationError(std::string("rk4_step: non-finite ") + stage + " at t=" +
                             std::to_string(t));
    }
  };
  const Eigen::VectorXd k1 = f(t, x);
  check(k1, "k1");
  const Eigen::VectorXd k2 = f(t + 0.5 * dt, (x + 0.5 * dt * k1).eval());
  check(k2, "k2");
  const Eigen::VectorXd k3 = f(t + 0.5 * dt, (x + 0.5 * dt * k2).eval());
  check(k3, "k3");
  const Eigen::VectorXd k4 = f(t + dt, (x + dt * k3).eval());
  check(k4, "k4");
  Eigen::VectorXd next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check(next, "state");
  return next;
}

}  // namespace cdo

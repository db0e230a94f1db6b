#pragma once

// Independent oracle suites behind `coupled_do verify`. Each check compares
// the library against a separately derived reference (closed-form Chebyshev
// values, brute-force sums, dense least squares) and names the invariant it
// guards.

#include "cdo/basis.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cdo::verify {

enum class Level { Fast, Full };

/// Throws ConfigError("--level").
Level parse_level(const std::string& name);

struct CheckResult {
  std::string name;  // the invariant under test
  bool passed = false;
  std::string detail;
};

/// Power-series coefficients of T_k from the explicit sum formula, lowest
/// power first.
std::vector<double> chebyshev_power_coefficients(int k);

/// xi(t) = D varsigma(t) against cos(k acos t) for random t in [-1, 1].
CheckResult check_chebyshev_identity(const StructureMatrices& structure, int draws = 100,
                                     std::uint64_t seed = 1);

/// Central differences of varsigma against A varsigma; the error must fall
/// by about 4x when h halves (or vanish for degree <= 2).
CheckResult check_exosystem(const StructureMatrices& structure, int draws = 100,
                            std::uint64_t seed = 1);

/// Theta B(x) xi(d) against the explicit double sum over (h_k, h_l).
CheckResult check_separation(int order, int state_dim, int feature_dim, int draws = 100,
                             std::uint64_t seed = 1);

/// Noiseless in-span recovery with a tiny ridge.
CheckResult check_rls_recovery(std::uint64_t seed = 1);
/// Relative gradient of the ridge objective at the returned optimum.
CheckResult check_rls_gradient(std::uint64_t seed = 1);
/// ||Theta*(delta)||_F is non-increasing in delta.
CheckResult check_rls_shrinkage(std::uint64_t seed = 1);

/// Eigenvalues of A - Gamma c at distinct random poles for random rows.
CheckResult check_gain_placement(int draws = 100, std::uint64_t seed = 1);
/// Characteristic polynomial for a repeated pole, where eigenvalues of a
/// defective matrix cannot be resolved to tight tolerance.
CheckResult check_repeated_pole_placement(int draws = 100, std::uint64_t seed = 1);

/// Global error of RK4 on x' = -x + sin t drops 16x per halving of h.
CheckResult check_rk4_order();

/// Least-squares projection of the Newton disturbance
/// -v^2 + 50 - 10 t - 0.5 t^2 on the p-order tensor basis over
/// v in [-10, 10], t in [0, 100], raw (unnormalized) coordinates, using a
/// dense grid and explicit power-series Chebyshev polynomials. 1 x (p+1)^2.
Eigen::RowVectorXd newton_projection_oracle(int order = 2, int grid = 201);

/// The coefficient vector as commonly quoted for this disturbance.
Eigen::RowVectorXd newton_printed_theta();

CheckResult check_newton_projection(std::ostream* log = nullptr);

std::vector<CheckResult> run_checks(Level level, std::ostream* log = nullptr);

}  // namespace cdo::verify

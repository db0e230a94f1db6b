#include "cdo/observer.hpp"

#include "cdo/error.hpp"
#include "cdo/integrate.hpp"

#include <cmath>
#include <string>

namespace cdo {

Eigen::VectorXd monic_polynomial(const Poles& poles) {
  std::vector<std::complex<double>> coeffs{1.0};
  for (const auto& root : poles) {
    std::vector<std::complex<double>> next(coeffs.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i] += coeffs[i];
      next[i + 1] -= root * coeffs[i];
    }
    coeffs = std::move(next);
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double scale = std::max(1.0, std::abs(coeffs[i]));
    if (std::abs(coeffs[i].imag()) > 1e-9 * scale) {
      throw std::invalid_argument("poles must be real or come in conjugate pairs");
    }
    out(static_cast<Eigen::Index>(i)) = coeffs[i].real();
  }
  return out;
}

Eigen::VectorXd characteristic_polynomial(const Eigen::MatrixXd& m) {
  // Faddeev-LeVerrier
  const Eigen::Index n = m.rows();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c(0) = 1.0;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    acc = m * acc + c(k - 1) * eye;
    c(k) = -(m * acc).trace() / static_cast<double>(k);
  }
  return c;
}

Eigen::VectorXd design_gain(const Eigen::MatrixXd& A, const Eigen::RowVectorXd& c,
                            const Poles& poles, double cond_limit) {
  const Eigen::Index s = A.rows();
  if (A.cols() != s || c.size() != s) throw std::invalid_argument("design_gain: shape mismatch");
  if (static_cast<Eigen::Index>(poles.size()) != s) {
    throw std::invalid_argument("design_gain: need " + std::to_string(s) + " poles, got " +
                                std::to_string(poles.size()));
  }
  for (const auto& pole : poles) {
    if (!(pole.real() < 0.0)) throw std::invalid_argument("design_gain: poles must satisfy Re < 0");
  }
  if (!c.allFinite()) throw Unobservable("output row is not finite");

  Eigen::MatrixXd obs(s, s);
  obs.row(0) = c;
  for (Eigen::Index i = 1; i < s; ++i) obs.row(i) = obs.row(i - 1) * A;

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(obs);
  const auto& sv = svd.singularValues();
  const double cond = sv(s - 1) > 0.0 ? sv(0) / sv(s - 1) : INFINITY;
  if (!(cond <= cond_limit)) {
    throw Unobservable("observability matrix condition " + std::to_string(cond) +
                       " exceeds limit " + std::to_string(cond_limit));
  }

  const Eigen::VectorXd last = Eigen::VectorXd::Unit(s, s - 1);
  const Eigen::VectorXd w = obs.partialPivLu().solve(last);

  // q(A) w by Horner's scheme on vectors.
  const Eigen::VectorXd q = monic_polynomial(poles);
  Eigen::VectorXd gamma = q(0) * w;
  for (Eigen::Index k = 1; k <= s; ++k) gamma = A * gamma + q(k) * w;
  return gamma;
}

// -- HigherOrderObserver ---------------------------------------------------

HigherOrderObserver::HigherOrderObserver(SeparatedModel model, ControlAffineDynamics dynamics,
                                         HodoOptions options)
    : model_(std::move(model)), dynamics_(std::move(dynamics)), options_(std::move(options)),
      exosystem_(model_.exosystem()) {
  const int n = model_.output_dim();
  if (model_.config().feature_dim != 1) {
    throw ConfigError("basis.feature_dim", "the observer needs a time-feature model");
  }
  if (dynamics_.state_dim != n) {
    throw ConfigError("scenario.plant", "plant state dimension does not match the model");
  }
  if (static_cast<std::size_t>(options_.poles.size()) != model_.config().s2()) {
    throw ConfigError("observer.poles", "need " + std::to_string(model_.config().s2()) +
                                            " poles for p=" + std::to_string(model_.config().order));
  }
  for (const auto& pole : options_.poles) {
    if (!(pole.real() < 0.0)) throw ConfigError("observer.poles", "must have negative real parts");
  }
  try {
    monic_polynomial(options_.poles);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("observer.poles", e.what());
  }
  if (!(options_.cond_limit > 1.0)) throw ConfigError("observer.cond_limit", "must exceed 1");
  if (options_.output_weights.size() == 0) {
    weights_ = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  } else {
    if (options_.output_weights.size() != n || !(options_.output_weights.norm() > 0.0)) {
      throw ConfigError("observer.output_weights", "need n non-zero weights");
    }
    weights_ = options_.output_weights.normalized();
  }
}

Eigen::MatrixXd HigherOrderObserver::gain(const Eigen::VectorXd& x) const {
  const Eigen::RowVectorXd row = weights_.transpose() * model_.output_map(x);
  const Eigen::VectorXd column =
      design_gain(exosystem_, row, options_.poles, options_.cond_limit);
  return column * weights_.transpose();
}

double HigherOrderObserver::check_placement(const Eigen::MatrixXd& gamma,
                                            const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd closed = exosystem_ - gamma * model_.output_map(x);
  const Eigen::VectorXd want = monic_polynomial(options_.poles);
  const Eigen::VectorXd got = characteristic_polynomial(closed);
  return ((want - got).array().abs() / want.array().abs().max(1.0)).maxCoeff();
}

HodoState HigherOrderObserver::init(const Eigen::VectorXd& x0, const Eigen::VectorXd& sigma0) const {
  const auto s2 = static_cast<Eigen::Index>(model_.config().s2());
  if (x0.size() != model_.output_dim() || !x0.allFinite()) {
    throw DataError("observer initial state must be a finite n-vector");
  }
  HodoState state;
  state.sigma_hat = sigma0.size() == 0 ? Eigen::VectorXd::Zero(s2) : sigma0;
  if (state.sigma_hat.size() != s2) throw ConfigError("observer.sigma0", "must have s2 entries");
  state.gamma = gain(x0);
  state.last_good_gamma = state.gamma;
  state.z = state.sigma_hat - state.gamma * x0;
  if (options_.verify_placement) state.placement_error = check_placement(state.gamma, x0);
  return state;
}

Eigen::VectorXd HigherOrderObserver::estimate(const HodoState& state, const Eigen::VectorXd& x) const {
  return model_.output_map(x) * (state.z + state.gamma * x);
}

HodoStep HigherOrderObserver::step(HodoState state, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u, double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("observer step: dt must be positive");
  if (!x.allFinite() || !u.allFinite()) throw DataError("observer step: non-finite input");

  const Eigen::VectorXd sigma_start = state.z + state.gamma * x;
  Eigen::MatrixXd gamma;
  try {
    gamma = gain(x);
    state.last_good_gamma = gamma;
    state.gain_fallback = false;
  } catch (const Unobservable&) {
    gamma = state.last_good_gamma;
    state.gain_fallback = true;
    ++state.fallback_count;
  }
  if (options_.verify_placement && !state.gain_fallback) {
    state.placement_error = check_placement(gamma, x);
    if (state.placement_error > 1e-8) {
      throw NumericalError("frozen-time placement mismatch " +
                           std::to_string(state.placement_error));
    }
  }
  state.z = sigma_start - gamma * x;
  state.gamma = gamma;

  const Eigen::MatrixXd output = model_.output_map(x);
  const Eigen::VectorXd gx = gamma * x;
  const Eigen::VectorXd drive = gamma * dynamics_.nominal(x, u);
  const Eigen::MatrixXd closed = exosystem_ - gamma * output;
  auto field = [&](double, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return closed * (z + gx) - drive;
  };
  state.z = rk4_step(field, state.z, 0.0, dt);
  state.sigma_hat = state.z + gx;
  Eigen::VectorXd delta_hat = output * state.sigma_hat;
  return {std::move(state), std::move(delta_hat)};
}

// -- FirstOrderObserver ----------------------------------------------------

FirstOrderObserver::FirstOrderObserver(ControlAffineDynamics dynamics, double gain)
    : dynamics_(std::move(dynamics)), gain_(gain) {
  if (!(gain_ > 0.0) || !std::isfinite(gain_)) {
    throw ConfigError("observer.ndo_gain", "must be positive");
  }
}

NdoState FirstOrderObserver::init(const Eigen::VectorXd& x0, const Eigen::VectorXd& delta0) const {
  const Eigen::VectorXd d0 = delta0.size() == 0 ? Eigen::VectorXd::Zero(x0.size()) : delta0;
  return {d0 - gain_ * x0};
}

Eigen::VectorXd FirstOrderObserver::estimate(const NdoState& state, const Eigen::VectorXd& x) const {
  return state.z + gain_ * x;
}

std::pair<NdoState, Eigen::VectorXd> FirstOrderObserver::step(NdoState state,
                                                              const Eigen::VectorXd& x,
                                                              const Eigen::VectorXd& u,
                                                              double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("observer step: dt must be positive");
  if (!x.allFinite() || !u.allFinite()) throw DataError("observer step: non-finite input");
  const Eigen::VectorXd drive = gain_ * (gain_ * x + dynamics_.nominal(x, u));
  auto field = [&](double, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return -gain_ * z - drive;
  };
  state.z = rk4_step(field, state.z, 0.0, dt);
  Eigen::VectorXd delta_hat = estimate(state, x);
  return {std::move(state), std::move(delta_hat)};
}

}  // namespace cdo

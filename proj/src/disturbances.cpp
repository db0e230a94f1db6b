#include "cdo/disturbances.hpp"

#include "cdo/error.hpp"

#include <boost/algorithm/string.hpp>

#include <cmath>
#include <string>

namespace cdo {

namespace {

using ScalarFn = std::function<double(double, double)>;

Disturbance scalar(std::string name, Interval xbox, Interval tbox, ScalarFn fn) {
  Disturbance d;
  d.name = std::move(name);
  d.state_box = xbox;
  d.time_box = tbox;
  d.eval = [fn = std::move(fn)](const Eigen::VectorXd& x, double t) {
    return Eigen::VectorXd::Constant(1, fn(x(0), t)).eval();
  };
  return d;
}

double parse_number(const std::string& token, std::string_view name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("function", "bad number '" + token + "' in '" + std::string(name) + "'");
  }
}

Disturbance parse_poly(std::string_view name) {
  struct Term {
    double coeff;
    int x_power;
    int t_power;
  };
  std::vector<std::string> parts;
  const std::string body(name.substr(5));
  boost::split(parts, body, boost::is_any_of(","));
  std::vector<Term> terms;
  for (const auto& part : parts) {
    std::vector<std::string> fields;
    boost::split(fields, part, boost::is_any_of(":"));
    if (fields.size() != 3) {
      throw ConfigError("function", "poly terms are coeff:x_power:t_power, got '" + part + "'");
    }
    const double a = parse_number(fields[1], name);
    const double b = parse_number(fields[2], name);
    if (a < 0 || b < 0 || a != std::floor(a) || b != std::floor(b)) {
      throw ConfigError("function", "poly powers must be non-negative integers");
    }
    terms.push_back({parse_number(fields[0], name), static_cast<int>(a), static_cast<int>(b)});
  }
  return scalar(std::string(name), {-1, 1}, {-1, 1}, [terms](double x, double t) {
    double sum = 0.0;
    for (const auto& term : terms) sum += term.coeff * std::pow(x, term.x_power) * std::pow(t, term.t_power);
    return sum;
  });
}

Disturbance parse_trig(std::string_view name) {
  std::vector<std::string> fields;
  const std::string body(name.substr(5));
  boost::split(fields, body, boost::is_any_of(":"));
  if (fields.size() != 3) throw ConfigError("function", "trig form is trig:amp:wx:wt");
  const double amp = parse_number(fields[0], name);
  const double wx = parse_number(fields[1], name);
  const double wt = parse_number(fields[2], name);
  return scalar(std::string(name), {-1, 1}, {-1, 1}, [amp, wx, wt](double x, double t) {
    return amp * std::sin(wx * x) * std::sin(wt * t);
  });
}

}  // namespace

Disturbance find_disturbance(std::string_view name) {
  if (name == "sine_product") {
    return scalar("sine_product", {-2, 2}, {0, 4},
                  [](double x, double t) { return std::sin(x) * std::sin(t); });
  }
  if (name == "cubic_quadratic") {
    return scalar("cubic_quadratic", {-2, 2}, {0, 4}, [](double x, double t) {
      return x - x * x * x / 12.0 - 0.25 * t * t;
    });
  }
  if (name == "sine_cubic") {
    return scalar("sine_cubic", {-2, 2}, {0, 4},
                  [](double x, double t) { return -std::sin(x) * t * t * t / 9.0; });
  }
  if (name == "newton") {
    return scalar("newton", {-10, 10}, {0, 100},
                  [](double v, double t) { return -v * v + 50.0 - 10.0 * t - 0.5 * t * t; });
  }
  if (name.starts_with("poly:")) return parse_poly(name);
  if (name.starts_with("trig:")) return parse_trig(name);
  throw ConfigError("function", "unknown disturbance '" + std::string(name) + "'");
}

std::vector<std::string> builtin_disturbances() {
  return {"sine_product", "cubic_quadratic", "sine_cubic", "newton"};
}

}  // namespace cdo

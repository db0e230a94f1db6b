#include "cdo/basis.hpp"

#include "cdo/error.hpp"
#include "cdo/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cdo {

namespace {

// Keeps Theta and the dense feature matrices within sane memory bounds.
constexpr std::size_t kMaxColumns = std::size_t{1} << 20;

double to_unit(double v, const Interval& box) {
  return 2.0 * (v - box.lo) / (box.hi - box.lo) - 1.0;
}

void check_boxes(const std::vector<Interval>& boxes, int dims, const std::string& field) {
  if (static_cast<int>(boxes.size()) != dims) {
    throw ConfigError(field, "expected " + std::to_string(dims) + " intervals, got " +
                                 std::to_string(boxes.size()));
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
      throw ConfigError(field + "[" + std::to_string(i) + "]", "require finite lo < hi");
    }
  }
}

}  // namespace

std::size_t int_pow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (base != 0 && r > std::numeric_limits<std::size_t>::max() / base) {
      throw std::overflow_error("basis size overflows size_t");
    }
    r *= base;
  }
  return r;
}

std::size_t BasisConfig::state_block() const {
  return int_pow(static_cast<std::size_t>(order) + 1, state_dim);
}

std::size_t BasisConfig::s1() const {
  return int_pow(static_cast<std::size_t>(order) + 1, state_dim + feature_dim);
}

std::size_t BasisConfig::s2() const {
  return int_pow(static_cast<std::size_t>(order) + 1, feature_dim);
}

void BasisConfig::validate() const {
  if (order < 0) throw ConfigError("basis.order", "must be non-negative");
  if (state_dim < 1) throw ConfigError("basis.state_dim", "must be at least 1");
  if (feature_dim < 1) throw ConfigError("basis.feature_dim", "must be at least 1");
  try {
    if (s1() > kMaxColumns) {
      throw ConfigError("basis.order", "(p+1)^(n+m) = " + std::to_string(s1()) + " is too large");
    }
  } catch (const std::overflow_error&) {
    throw ConfigError("basis.order", "(p+1)^(n+m) overflows");
  }
  if (normalize) {
    check_boxes(state_box, state_dim, "basis.state_box");
    check_boxes(feature_box, feature_dim, "basis.feature_box");
  }
}

bool operator==(const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; }

bool operator==(const BasisConfig& a, const BasisConfig& b) {
  return a.order == b.order && a.state_dim == b.state_dim && a.feature_dim == b.feature_dim &&
         a.normalize == b.normalize && a.state_box == b.state_box &&
         a.feature_box == b.feature_box;
}

double cheb_eval(int k, double tau) {
  if (k < 0) throw std::invalid_argument("cheb_eval: negative order");
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = tau;
  for (int i = 2; i <= k; ++i) {
    const double next = 2.0 * tau * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

MultiIndex flat_to_multi(std::size_t h, int order, int dims) {
  if (order < 0 || dims < 0) throw std::invalid_argument("flat_to_multi: negative order or dims");
  const std::size_t base = static_cast<std::size_t>(order) + 1;
  if (h >= int_pow(base, dims)) {
    throw std::out_of_range("flat index " + std::to_string(h) + " out of range for p=" +
                            std::to_string(order) + ", dims=" + std::to_string(dims));
  }
  MultiIndex mi;
  mi.flat = h;
  mi.digits.resize(static_cast<std::size_t>(dims));
  for (auto& d : mi.digits) {
    d = static_cast<int>(h % base);
    h /= base;
  }
  return mi;
}

std::size_t multi_to_flat(std::span<const int> digits, int order) {
  const std::size_t base = static_cast<std::size_t>(order) + 1;
  std::size_t flat = 0;
  std::size_t scale = 1;
  for (int d : digits) {
    if (d < 0 || d > order) throw std::out_of_range("multi-index digit out of range");
    flat += static_cast<std::size_t>(d) * scale;
    scale *= base;
  }
  return flat;
}

StructureMatrices structure_matrices(std::size_t s2) {
  if (s2 == 0) throw std::invalid_argument("structure_matrices: s2 must be positive");
  const auto n = static_cast<Eigen::Index>(s2);
  StructureMatrices sm{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  sm.D(0, 0) = 1.0;
  if (n > 1) sm.D(1, 1) = 1.0;
  for (Eigen::Index i = 2; i < n; ++i) {
    // T_i = 2 t T_{i-1} - T_{i-2}; multiplying by t shifts coefficients right.
    for (Eigen::Index j = 1; j < n; ++j) sm.D(i, j) = 2.0 * sm.D(i - 1, j - 1);
    sm.D.row(i) -= sm.D.row(i - 2);
  }
  for (Eigen::Index j = 0; j + 1 < n; ++j) sm.A(j + 1, j) = static_cast<double>(j + 1);
  return sm;
}

Eigen::VectorXd monomial_vector(double t, std::size_t size) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size));
  double p = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = p;
    p *= t;
  }
  return v;
}

ChebyshevBasis::ChebyshevBasis(BasisConfig config) : config_(std::move(config)) {
  config_.validate();
}

Eigen::VectorXd ChebyshevBasis::normalize_state(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != config_.state_dim) {
    throw std::invalid_argument("state dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(config_.state_dim));
  }
  Eigen::VectorXd out = x;
  if (config_.normalize) {
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out(i) = to_unit(out(i), config_.state_box[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

Eigen::VectorXd ChebyshevBasis::normalize_feature(const Eigen::Ref<const Eigen::VectorXd>& d) const {
  if (d.size() != config_.feature_dim) {
    throw std::invalid_argument("feature dimension " + std::to_string(d.size()) + ", expected " +
                                std::to_string(config_.feature_dim));
  }
  Eigen::VectorXd out = d;
  if (config_.normalize) {
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out(i) = to_unit(out(i), config_.feature_box[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

double ChebyshevBasis::time_scale() const {
  if (!config_.normalize) return 1.0;
  const auto& box = config_.feature_box.front();
  return 2.0 / (box.hi - box.lo);
}

Eigen::VectorXd ChebyshevBasis::tensor_vector(const Eigen::VectorXd& normalized) const {
  const int p = config_.order;
  const auto dims = static_cast<int>(normalized.size());
  const std::size_t len = int_pow(static_cast<std::size_t>(p) + 1, dims);
  // table(k, i) = T_k(normalized_i)
  Eigen::MatrixXd table(p + 1, dims);
  for (int i = 0; i < dims; ++i) {
    for (int k = 0; k <= p; ++k) table(k, i) = cheb_eval(k, normalized(i));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(len));
  for (std::size_t h = 0; h < len; ++h) {
    std::size_t rem = h;
    double prod = 1.0;
    for (int i = 0; i < dims; ++i) {
      prod *= table(static_cast<Eigen::Index>(rem % (p + 1)), i);
      rem /= static_cast<std::size_t>(p + 1);
    }
    out(static_cast<Eigen::Index>(h)) = prod;
  }
  return out;
}

Eigen::VectorXd ChebyshevBasis::pi_vector(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return tensor_vector(normalize_state(x));
}

Eigen::MatrixXd ChebyshevBasis::b_matrix(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd pi = pi_vector(x);
  const auto block = static_cast<Eigen::Index>(config_.state_block());
  const auto cols = static_cast<Eigen::Index>(config_.s2());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(block * cols, cols);
  for (Eigen::Index j = 0; j < cols; ++j) b.block(j * block, j, block, 1) = pi;
  return b;
}

Eigen::VectorXd ChebyshevBasis::xi_vector(const Eigen::Ref<const Eigen::VectorXd>& d) const {
  return tensor_vector(normalize_feature(d));
}

Eigen::VectorXd ChebyshevBasis::xi_vector(double t) const {
  return xi_vector(Eigen::VectorXd::Constant(1, t));
}

Eigen::VectorXd ChebyshevBasis::monomial_vector(double t) const {
  if (config_.feature_dim != 1) {
    throw std::invalid_argument("monomial_vector requires a scalar time feature");
  }
  const double tau = normalize_feature(Eigen::VectorXd::Constant(1, t))(0);
  return cdo::monomial_vector(tau, config_.s2());
}

Eigen::VectorXd ChebyshevBasis::feature_row(const Eigen::Ref<const Eigen::VectorXd>& x,
                                            const Eigen::Ref<const Eigen::VectorXd>& d) const {
  const Eigen::VectorXd pi = pi_vector(x);
  const Eigen::VectorXd xi = xi_vector(d);
  Eigen::VectorXd row(pi.size() * xi.size());
  for (Eigen::Index j = 0; j < xi.size(); ++j) row.segment(j * pi.size(), pi.size()) = xi(j) * pi;
  return row;
}

Eigen::MatrixXd ChebyshevBasis::feature_matrix(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                               const Eigen::Ref<const Eigen::MatrixXd>& features) const {
  if (states.cols() != config_.state_dim || features.cols() != config_.feature_dim ||
      states.rows() != features.rows()) {
    throw std::invalid_argument("feature_matrix: inconsistent state/feature dimensions");
  }
  const auto count = static_cast<std::size_t>(states.rows());
  const int p = config_.order;
  const int dims = config_.state_dim + config_.feature_dim;

  // One order-major Chebyshev table per input dimension.
  std::vector<std::vector<double>> tables(static_cast<std::size_t>(dims));
  std::vector<double> tau(count);
  for (int dim = 0; dim < dims; ++dim) {
    const bool is_state = dim < config_.state_dim;
    const int local = is_state ? dim : dim - config_.state_dim;
    const auto column = is_state ? states.col(local) : features.col(local);
    const Interval* box = nullptr;
    if (config_.normalize) {
      box = is_state ? &config_.state_box[static_cast<std::size_t>(local)]
                     : &config_.feature_box[static_cast<std::size_t>(local)];
    }
    for (std::size_t i = 0; i < count; ++i) {
      const double v = column(static_cast<Eigen::Index>(i));
      tau[i] = box ? to_unit(v, *box) : v;
    }
    auto& table = tables[static_cast<std::size_t>(dim)];
    table.resize(static_cast<std::size_t>(p + 1) * count);
    kernels::chebyshev_table(tau, p, table);
  }

  const std::size_t s1 = config_.s1();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(s1));
  for (std::size_t h = 0; h < s1; ++h) {
    std::span<double> col(out.col(static_cast<Eigen::Index>(h)).data(), count);
    std::size_t rem = h;
    for (int dim = 0; dim < dims; ++dim) {
      const auto k = rem % static_cast<std::size_t>(p + 1);
      rem /= static_cast<std::size_t>(p + 1);
      std::span<const double> row(tables[static_cast<std::size_t>(dim)].data() + k * count, count);
      if (dim == 0) {
        std::copy(row.begin(), row.end(), col.begin());
      } else {
        kernels::hadamard(col, row, col);
      }
    }
  }
  return out;
}

}  // namespace cdo

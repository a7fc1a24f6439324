#include "hmt/specfun.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hmt {

namespace {

void require_not_nan(double v, const char* what) {
  if (std::isnan(v)) {
    throw std::domain_error(std::string(what) + ": NaN argument");
  }
}

// L_n^alpha(t) and L_{n-1}^alpha(t), carried with an explicit log scale so
// that large orders at large t do not overflow. Extended precision keeps the
// weights accurate to a few ulps after rounding to double.
struct ScaledLaguerrePair {
  long double value;
  long double previous;
  long double log_scale;
};

ScaledLaguerrePair scaled_laguerre_pair(int n, long double alpha, long double t) {
  constexpr long double kRescale = 1e150L;
  const long double log_rescale = std::log(kRescale);
  long double previous = 0.0L;
  long double value = 1.0L;
  long double log_scale = 0.0L;
  for (int k = 0; k < n; ++k) {
    const long double next =
        ((2.0L * k + 1.0L + alpha - t) * value - (k + alpha) * previous) / (k + 1.0L);
    previous = value;
    value = next;
    if (std::abs(value) > kRescale) {
      value /= kRescale;
      previous /= kRescale;
      log_scale += log_rescale;
    }
  }
  return {value, previous, log_scale};
}

// Gauss rule for the weight t^alpha e^{-t}; weights are returned as logs.
void generalized_rule(int n, double alpha, std::vector<double>& nodes,
                      std::vector<double>& log_weights) {
  Eigen::VectorXd diagonal(n);
  Eigen::VectorXd off_diagonal(std::max(n - 1, 0));
  for (int k = 0; k < n; ++k) diagonal[k] = 2.0 * k + 1.0 + alpha;
  for (int k = 1; k < n; ++k) off_diagonal[k - 1] = std::sqrt(k * (k + alpha));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diagonal, off_diagonal, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("gauss_laguerre: eigenvalue solver failed");
  }

  const long double a = alpha;
  // log Gamma(n + alpha + 1) - log n!
  const long double log_ratio = std::lgamma(n + a + 1.0L) - std::lgamma(n + 1.0L);
  nodes.resize(n);
  log_weights.resize(n);
  for (int i = 0; i < n; ++i) {
    long double t = solver.eigenvalues()[i];
    for (int iter = 0; iter < 100; ++iter) {
      const auto p = scaled_laguerre_pair(n, a, t);
      // L_n / L_n' with t L_n'(t) = n L_n - (n + alpha) L_{n-1}
      const long double step = t * p.value / (n * p.value - (n + a) * p.previous);
      t -= step;
      if (std::abs(step) <= 4.0L * std::numeric_limits<long double>::epsilon() * t) break;
    }
    const auto p = scaled_laguerre_pair(n, a, t);
    nodes[i] = static_cast<double>(t);
    // w = Gamma(n + alpha + 1) t / (n! ((n + alpha) L_{n-1}(t))^2)
    log_weights[i] = static_cast<double>(
        log_ratio + std::log(t) - 2.0L * std::log(n + a) -
        2.0L * (std::log(std::abs(p.previous)) + p.log_scale));
  }
}

}  // namespace

double laguerre(int n, double alpha, double z) {
  if (n < 0) throw std::domain_error("laguerre: negative degree");
  if (!(alpha > -1.0)) throw std::domain_error("laguerre: alpha must exceed -1");
  require_not_nan(z, "laguerre");
  if (n == 0) return 1.0;
  double previous = 1.0;
  double value = 1.0 + alpha - z;
  for (int k = 1; k < n; ++k) {
    const double next =
        ((2.0 * k + 1.0 + alpha - z) * value - (k + alpha) * previous) / (k + 1.0);
    previous = value;
    value = next;
  }
  return value;
}

void laguerre_sequence(double alpha, double z, std::span<double> out) {
  if (!(alpha > -1.0)) throw std::domain_error("laguerre: alpha must exceed -1");
  require_not_nan(z, "laguerre");
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = 1.0 + alpha - z;
  for (std::size_t k = 1; k + 1 < out.size(); ++k) {
    const double kd = static_cast<double>(k);
    out[k + 1] = ((2.0 * kd + 1.0 + alpha - z) * out[k] - (kd + alpha) * out[k - 1]) /
                 (kd + 1.0);
  }
}

namespace detail {

double kummer_phi_power_series(double z) {
  double sum = 1.0;
  double term = 1.0;
  for (int k = 0; k < 10000; ++k) {
    term *= (2.0 + k) / (0.5 + k) * z / (k + 1.0);
    sum += term;
    if (k > -z && std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

double kummer_phi_transformed_series(double z) {
  const double y = -z;
  double sum = 1.0;
  double term = 1.0;
  for (int k = 0; k < 10000; ++k) {
    term *= (-1.5 + k) / (0.5 + k) * y / (k + 1.0);
    sum += term;
    if (k > y && std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return std::exp(-y) * sum;
}

double kummer_phi_asymptotic(double z) {
  const double y = -z;
  double sum = 1.0;
  double term = 1.0;
  for (int k = 0; k < 200; ++k) {
    const double next = term * (2.0 + k) * (2.5 + k) / ((k + 1.0) * y);
    if (std::abs(next) >= std::abs(term)) break;  // divergent tail
    term = next;
    sum += term;
    if (std::abs(term) <= 1e-17 * sum) break;
  }
  return 0.75 / (y * y) * sum;
}

}  // namespace detail

double kummer_phi(double z) {
  require_not_nan(z, "kummer_phi");
  if (z > 0.0) throw std::domain_error("kummer_phi: argument must be <= 0");
  if (std::isinf(z)) return 0.0;
  const double y = -z;
  if (y <= detail::kKummerSeriesLimit) return detail::kummer_phi_power_series(z);
  if (y <= detail::kKummerAsymptoticLimit) return detail::kummer_phi_transformed_series(z);
  return detail::kummer_phi_asymptotic(z);
}

QuadratureRule::QuadratureRule(std::vector<double> nodes, std::vector<double> log_weights,
                               std::vector<double> half_nodes,
                               std::vector<double> half_log_weights)
    : nodes_(std::move(nodes)),
      log_weights_(std::move(log_weights)),
      half_nodes_(std::move(half_nodes)),
      half_log_weights_(std::move(half_log_weights)) {
  if (nodes_.empty() || nodes_.size() != log_weights_.size() ||
      half_nodes_.size() != half_log_weights_.size()) {
    throw std::invalid_argument("QuadratureRule: node/weight size mismatch");
  }
  weights_.reserve(log_weights_.size());
  for (double lw : log_weights_) weights_.push_back(std::exp(lw));
}

QuadratureRule gauss_laguerre(int order) {
  if (order < 1 || order > kMaxQuadratureOrder) {
    throw std::invalid_argument("gauss_laguerre: order must be in [1, " +
                                std::to_string(kMaxQuadratureOrder) + "], got " +
                                std::to_string(order));
  }
  std::vector<double> nodes, log_weights, half_nodes, half_log_weights;
  generalized_rule(order, 0.0, nodes, log_weights);
  generalized_rule(order, 0.5, half_nodes, half_log_weights);
  return QuadratureRule(std::move(nodes), std::move(log_weights), std::move(half_nodes),
                        std::move(half_log_weights));
}

std::complex<double> kernel_integral(const std::function<double(double)>& g, int M,
                                     double kappa, double x, const QuadratureRule& rule,
                                     double extra_power) {
  if (M < 0) throw std::invalid_argument("kernel_integral: M must be nonnegative");
  if (!(kappa > 1.0) || !std::isfinite(kappa)) {
    throw std::domain_error("kernel_integral: kappa must be finite and > 1");
  }
  require_not_nan(x, "kernel_integral");
  const double power = M + extra_power;
  auto accumulate = [&](std::span<const double> nodes, std::span<const double> log_weights,
                        double p, bool want_real, bool want_imag) {
    std::complex<double> sum{0.0, 0.0};
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double t = nodes[i];
      const double scale = std::exp(log_weights[i] + p * std::log(t));
      if (scale == 0.0) continue;
      const double phase = 2.0 * std::sqrt(kappa * t) * x;
      const double value = scale * g(t);
      sum += std::complex<double>(want_real ? value * std::cos(phase) : 0.0,
                                  want_imag ? value * std::sin(phase) : 0.0);
    }
    return sum;
  };

  // t^p cos(c sqrt t) is smooth in t for integer p and t^p sin(c sqrt t) for
  // half-integer p; the other part carries a sqrt(t) factor and is taken
  // from the rule for the weight sqrt(t) e^{-t} instead.
  const double twice = 2.0 * power;
  const bool half_grid = !rule.half_nodes().empty() && twice == std::floor(twice);
  if (!half_grid) return accumulate(rule.nodes(), rule.log_weights(), power, true, true);
  const bool integer_power = power == std::floor(power);
  const auto smooth = accumulate(rule.nodes(), rule.log_weights(), power, integer_power,
                                 !integer_power);
  const auto other = accumulate(rule.half_nodes(), rule.half_log_weights(), power - 0.5,
                                !integer_power, integer_power);
  std::complex<double> sum = smooth + other;
  return sum;
}

}  // namespace hmt

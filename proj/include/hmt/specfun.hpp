// Special functions and Gauss-Laguerre quadrature used by the homodyne
// estimator kernels.

#ifndef HMT_SPECFUN_HPP
#define HMT_SPECFUN_HPP

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace hmt {

/// Generalized Laguerre polynomial L_n^alpha(z) by the three-term recurrence.
/// Throws std::domain_error for n < 0, alpha <= -1 or a NaN argument.
double laguerre(int n, double alpha, double z);

/// Writes L_k^alpha(z) for k = 0 .. out.size()-1 into `out`.
void laguerre_sequence(double alpha, double z, std::span<double> out);

/// Confluent hypergeometric function Phi(2, 1/2; z) = 1F1(2; 1/2; z) for z <= 0.
///
/// Three regimes: the defining power series for |z| <= 2, the Kummer-transformed
/// series e^z 1F1(-3/2; 1/2; -z) up to |z| = 50, and the large-argument
/// expansion (3/4) |z|^-2 sum_k (2)_k (5/2)_k / k! |z|^-k beyond. The
/// exponentially small companion of the expansion is below 1e-15 relative at
/// the switch point.
double kummer_phi(double z);

namespace detail {
// Exposed for the regime-agreement tests.
double kummer_phi_power_series(double z);
double kummer_phi_transformed_series(double z);
double kummer_phi_asymptotic(double z);
inline constexpr double kKummerSeriesLimit = 2.0;
inline constexpr double kKummerAsymptoticLimit = 50.0;
}  // namespace detail

/// Gauss rule for the weight e^{-t} on [0, inf).
///
/// Weights are kept in log form as well: for large orders the trailing
/// weights fall below the smallest representable double and `weights()`
/// holds zeros there, while `log_weights()` stays exact.
///
/// A companion rule of the same order for the weight sqrt(t) e^{-t} may be
/// attached; kernel_integral uses it for integrands with a sqrt(t) factor.
class QuadratureRule {
 public:
  QuadratureRule(std::vector<double> nodes, std::vector<double> log_weights,
                 std::vector<double> half_nodes = {},
                 std::vector<double> half_log_weights = {});

  int order() const noexcept { return static_cast<int>(nodes_.size()); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> log_weights() const noexcept { return log_weights_; }
  std::span<const double> half_nodes() const noexcept { return half_nodes_; }
  std::span<const double> half_log_weights() const noexcept { return half_log_weights_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<double> half_nodes_;
  std::vector<double> half_log_weights_;
};

inline constexpr int kDefaultQuadratureOrder = 150;
inline constexpr int kMaxQuadratureOrder = 512;

/// Nodes and weights of the `order`-point Gauss-Laguerre rule, 1 <= order <= 512.
/// Nodes come from the Jacobi-matrix eigenvalues and are polished by Newton
/// iteration on L_order.
QuadratureRule gauss_laguerre(int order);

/// Quadrature estimate of
///   int_0^inf dt exp(-t + 2i sqrt(kappa t) x) t^(M + extra_power) g(t).
/// Without a companion rule, or for a power that is not a multiple of 1/2,
/// this is sum_i w_i exp(2i sqrt(kappa t_i) x) t_i^(M + extra_power) g(t_i).
/// Otherwise the part of the integrand that is smooth in t uses the e^{-t}
/// rule and the part with a sqrt(t) factor uses the companion rule.
std::complex<double> kernel_integral(const std::function<double(double)>& g,
                                     int M, double kappa, double x,
                                     const QuadratureRule& rule,
                                     double extra_power = 0.0);

}  // namespace hmt

#endif  // HMT_SPECFUN_HPP

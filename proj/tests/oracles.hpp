// Independent reference computations used only by the tests.

#ifndef HMT_TESTS_ORACLES_HPP
#define HMT_TESTS_ORACLES_HPP

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/factorials.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

/// L_n^alpha(z) from the explicit sum; alpha must be a nonnegative integer.
inline double laguerre_explicit(int n, int alpha, double z) {
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double c = boost::math::binomial_coefficient<double>(n + alpha, n - k);
    sum += (k % 2 == 0 ? 1.0 : -1.0) * c * std::pow(z, k) / boost::math::factorial<double>(k);
  }
  return sum;
}

/// Adaptive Gauss-Kronrod on [0, inf) after t = u^2:
///   int_0^inf e^{-t} t^p g(t) e^{2i sqrt(kappa t) x} dt.
/// The Gaussian factor e^{-u^2} makes [0, 14] exact to double precision for
/// the polynomial growth used in the tests.
inline std::complex<double> oscillatory_integral(const std::function<double(double)>& g,
                                                 double p, double kappa, double x) {
  using boost::math::quadrature::gauss_kronrod;
  const double root = std::sqrt(kappa);
  auto integrand = [&](double u, bool imag) {
    if (u == 0.0) return 0.0;
    const double t = u * u;
    const double base = 2.0 * std::pow(u, 2.0 * p + 1.0) * std::exp(-t) * g(t);
    const double arg = 2.0 * root * u * x;
    return base * (imag ? std::sin(arg) : std::cos(arg));
  };
  const double upper = 14.0 + 0.5 * std::sqrt(std::max(0.0, p));
  const double re = gauss_kronrod<double, 61>::integrate(
      [&](double u) { return integrand(u, false); }, 0.0, upper, 20, 1e-14);
  const double im = gauss_kronrod<double, 61>::integrate(
      [&](double u) { return integrand(u, true); }, 0.0, upper, 20, 1e-14);
  return {re, im};
}

/// Adaptive quadrature on [0, inf) for smooth, exponentially decaying f.
inline double integrate_half_line(const std::function<double(double)>& f) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-13);
}

/// Re((-i)^power * value)
inline double rotated_real(std::complex<double> value, int power) {
  std::complex<double> r = value;
  for (int k = 0; k < power % 4; ++k) r *= std::complex<double>(0.0, -1.0);
  return r.real();
}

/// Kolmogorov distribution tail, Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// One-sample Kolmogorov-Smirnov p-value.
inline double ks_pvalue(std::vector<double> values, const std::function<double(double)>& cdf) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = cdf(values[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  const double root = std::sqrt(n);
  return kolmogorov_tail((root + 0.12 + 0.11 / root) * d);
}

/// Pearson chi-square p-value for observed counts against expected counts.
inline double chi_square_pvalue(const std::vector<double>& observed,
                                const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Harmonic-oscillator eigenfunctions for X = (a + a^dag)/2, n = 0, 1.
inline double oscillator_wavefunction(int n, double q) {
  const double ground = std::pow(2.0 / std::numbers::pi, 0.25) * std::exp(-q * q);
  return n == 0 ? ground : 2.0 * q * ground;
}

}  // namespace oracle

#endif  // HMT_TESTS_ORACLES_HPP

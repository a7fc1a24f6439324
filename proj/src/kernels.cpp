#include "hmt/kernels.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hmt {

namespace {

// 1/k for k = 1 .. kMaxPhotonNumber + 1; divisions dominate the recurrence otherwise.
const std::array<double, kMaxPhotonNumber + 2> kReciprocals = [] {
  std::array<double, kMaxPhotonNumber + 2> r{};
  for (std::size_t k = 1; k < r.size(); ++k) r[k] = 1.0 / static_cast<double>(k);
  return r;
}();

// L_k^alpha(z), k = 0 .. count-1, without argument checks (count <= kMaxPhotonNumber + 1).
inline void laguerre_fill(double alpha, double z, double* out, int count) {
  if (count <= 0) return;
  out[0] = 1.0;
  if (count == 1) return;
  out[1] = 1.0 + alpha - z;
  for (int k = 1; k + 1 < count; ++k) {
    out[k + 1] =
        ((2.0 * k + 1.0 + alpha - z) * out[k] - (k + alpha) * out[k - 1]) * kReciprocals[k + 1];
  }
}

// Re((-i)^power * value)
double real_of_rotated(std::complex<double> value, int power) {
  switch (power % 4) {
    case 0: return value.real();
    case 1: return value.imag();
    case 2: return -value.real();
    default: return -value.imag();
  }
}

std::complex<double> phase_factor(double angle) {
  return {std::cos(angle), std::sin(angle)};
}

void require_two_modes(const HomodyneSample& s, const char* what) {
  if (s.num_modes() != 2) {
    throw std::invalid_argument(std::string(what) + ": requires a two-mode sample, got " +
                                std::to_string(s.num_modes()) + " modes");
  }
}

void require_photon_number(int n, const char* what) {
  if (n < 0) {
    throw std::invalid_argument(std::string(what) + ": negative photon number");
  }
  if (n > kMaxPhotonNumber) {
    throw std::overflow_error(std::string(what) + ": photon number " + std::to_string(n) +
                              " exceeds " + std::to_string(kMaxPhotonNumber));
  }
}

// Column k of `out` receives L_k^alpha(z) at every entry of z.
void laguerre_columns(double alpha, const Eigen::ArrayXd& z, int rows, Eigen::ArrayXXd& out) {
  out.resize(z.size(), rows);
  if (rows == 0) return;
  out.col(0).setOnes();
  if (rows == 1) return;
  out.col(1) = (1.0 + alpha) - z;
  for (int k = 1; k + 1 < rows; ++k) {
    const double c = 2.0 * k + 1.0 + alpha;
    out.col(k + 1) = ((c - z) * out.col(k) - (k + alpha) * out.col(k - 1)) * kReciprocals[k + 1];
  }
}

double log_factorial(int n) { return std::lgamma(n + 1.0); }

}  // namespace

Efficiency::Efficiency(double eta) : eta_(eta) {
  if (!(eta > 0.5 && eta <= 1.0)) {
    throw std::domain_error("Efficiency: eta must lie in (0.5, 1], got " + std::to_string(eta) +
                            "; below 1/2 the estimators are unbounded");
  }
  kappa_ = 2.0 * eta / (2.0 * eta - 1.0);
  smear_variance_ = (1.0 - eta) / (4.0 * eta);
}

LOConfig::LOConfig(std::vector<double> thetas, std::vector<double> psis)
    : thetas_(std::move(thetas)), psis_(std::move(psis)) {
  if (psis_.empty() || thetas_.size() + 1 != psis_.size()) {
    throw std::invalid_argument("LOConfig: need M angles and M+1 phases");
  }
  for (double th : thetas_) {
    if (!(th >= 0.0 && th <= std::numbers::pi / 2)) {
      throw std::domain_error("LOConfig: angle outside [0, pi/2]");
    }
  }
  for (double psi : psis_) {
    if (!std::isfinite(psi)) throw std::domain_error("LOConfig: non-finite phase");
  }
  amplitudes_.resize(psis_.size());
  double sin_product = 1.0;
  for (std::size_t l = 0; l < thetas_.size(); ++l) {
    amplitudes_[l] = sin_product * std::cos(thetas_[l]);
    sin_product *= std::sin(thetas_[l]);
  }
  amplitudes_.back() = sin_product;
}

LOConfig LOConfig::two_mode(double theta, double psi0, double psi1) {
  return LOConfig({theta}, {psi0, psi1});
}

HomodyneSample::HomodyneSample(double x, LOConfig config, Efficiency efficiency)
    : x_(x), config_(std::move(config)), efficiency_(efficiency) {
  if (!std::isfinite(x)) throw std::domain_error("HomodyneSample: non-finite outcome");
}

std::complex<double> matrix_element_estimator(const FockProjector& proj,
                                              const HomodyneSample& s,
                                              const QuadratureRule& rule) {
  const int modes = s.num_modes();
  if (static_cast<int>(proj.n.size()) != modes || static_cast<int>(proj.m.size()) != modes) {
    throw std::invalid_argument("matrix_element_estimator: projector has " +
                                std::to_string(proj.n.size()) + "/" +
                                std::to_string(proj.m.size()) + " entries for " +
                                std::to_string(modes) + " modes");
  }
  const int M = modes - 1;
  const double kappa = s.efficiency().kappa();
  const auto u = s.config().amplitudes();
  const auto psi = s.config().psis();

  std::vector<int> lower(modes);
  std::vector<int> gap(modes);
  int total_gap = 0;
  double log_scale = (M + 1) * std::log(kappa) - log_factorial(M);
  double phase = 0.0;
  for (int l = 0; l < modes; ++l) {
    require_photon_number(proj.n[l], "matrix_element_estimator");
    require_photon_number(proj.m[l], "matrix_element_estimator");
    const int mu = std::max(proj.n[l], proj.m[l]);
    const int nu = std::min(proj.n[l], proj.m[l]);
    lower[l] = nu;
    gap[l] = mu - nu;
    total_gap += gap[l];
    phase += (proj.n[l] - proj.m[l]) * psi[l];
    log_scale += 0.5 * (log_factorial(nu) - log_factorial(mu));
    if (gap[l] > 0) {
      if (u[l] == 0.0) return {0.0, 0.0};
      log_scale += gap[l] * (0.5 * std::log(kappa) + std::log(u[l]));
    }
  }

  const auto integral = kernel_integral(
      [&](double t) {
        double product = 1.0;
        for (int l = 0; l < modes; ++l) {
          product *= laguerre(lower[l], gap[l], kappa * u[l] * u[l] * t);
        }
        return product;
      },
      M, kappa, s.x(), rule, 0.5 * total_gap);

  const double magnitude = std::exp(log_scale) * real_of_rotated(integral, total_gap);
  return magnitude * phase_factor(phase);
}

double diagonal_estimator(std::span<const int> n, const HomodyneSample& s,
                          const QuadratureRule& rule) {
  FockProjector proj{{n.begin(), n.end()}, {n.begin(), n.end()}};
  return matrix_element_estimator(proj, s, rule).real();
}

double total_photon_estimator(int n, const HomodyneSample& s, const QuadratureRule& rule) {
  require_photon_number(n, "total_photon_estimator");
  const int M = s.num_modes() - 1;
  const double kappa = s.efficiency().kappa();
  const auto integral = kernel_integral(
      [&](double t) { return laguerre(n, M, kappa * t); }, M, kappa, s.x(), rule);
  return std::exp((M + 1) * std::log(kappa) - log_factorial(M)) * integral.real();
}

double joint_photon_estimator(int n, int m, const HomodyneSample& s,
                              const QuadratureRule& rule) {
  require_two_modes(s, "joint_photon_estimator");
  require_photon_number(n, "joint_photon_estimator");
  require_photon_number(m, "joint_photon_estimator");
  const double kappa = s.efficiency().kappa();
  const auto u = s.config().amplitudes();
  const double a = kappa * u[0] * u[0];
  const double b = kappa * u[1] * u[1];
  const auto integral = kernel_integral(
      [&](double t) { return laguerre(n, 0.0, a * t) * laguerre(m, 0.0, b * t); }, 1, kappa,
      s.x(), rule);
  return kappa * kappa * integral.real();
}

double q_function_estimator(std::complex<double> alpha, std::complex<double> beta,
                            const HomodyneSample& s) {
  require_two_modes(s, "q_function_estimator");
  const double kappa = s.efficiency().kappa();
  const auto u = s.config().amplitudes();
  const auto psi = s.config().psis();
  const double centre = u[0] * (std::conj(alpha) * phase_factor(psi[0])).real() +
                        u[1] * (std::conj(beta) * phase_factor(psi[1])).real();
  const double shifted = s.x() - centre;
  return kappa * kappa * kummer_phi(-kappa * shifted * shifted);
}

double mgf_estimator(double z, const HomodyneSample& s) {
  require_two_modes(s, "mgf_estimator");
  if (!(z >= 0.0 && z <= 1.0)) {
    throw std::domain_error("mgf_estimator: z must lie in [0, 1]");
  }
  const double kappa = s.efficiency().kappa();
  const double q = z + (1.0 - z) / kappa;
  const double x = s.x();
  return kummer_phi(-(1.0 - z) / q * x * x) / (q * q);
}

double mean_photon_estimator(const HomodyneSample& s) {
  require_two_modes(s, "mean_photon_estimator");
  const double kappa = s.efficiency().kappa();
  const double x = s.x();
  return 4.0 * x * x + 2.0 / kappa - 2.0;
}

double second_moment_estimator(const HomodyneSample& s) {
  require_two_modes(s, "second_moment_estimator");
  const double kappa = s.efficiency().kappa();
  const double x2 = s.x() * s.x();
  return 8.0 * x2 * x2 + (24.0 / kappa - 20.0) * x2 + 6.0 / (kappa * kappa) - 10.0 / kappa +
         4.0;
}

double ghz_projector_estimator(double phi, std::span<const HomodyneSample> samples,
                               const QuadratureRule& rule) {
  if (samples.size() != 3) {
    throw std::invalid_argument("ghz_projector_estimator: expected 3 beams, got " +
                                std::to_string(samples.size()));
  }
  const FockProjector oo{{1, 0}, {1, 0}};
  const FockProjector ee{{0, 1}, {0, 1}};
  const FockProjector eo{{0, 1}, {1, 0}};  // <E| rho |O>, from the |O><E| term
  const FockProjector oe{{1, 0}, {0, 1}};
  std::complex<double> p_oo{1.0}, p_ee{1.0}, p_eo{1.0}, p_oe{1.0};
  for (const auto& s : samples) {
    require_two_modes(s, "ghz_projector_estimator");
    p_oo *= matrix_element_estimator(oo, s, rule);
    p_ee *= matrix_element_estimator(ee, s, rule);
    p_eo *= matrix_element_estimator(eo, s, rule);
    p_oe *= matrix_element_estimator(oe, s, rule);
  }
  const auto total = p_oo + p_ee + phase_factor(-phi) * p_eo + phase_factor(phi) * p_oe;
  return 0.5 * total.real();
}

TwoModeKernels::TwoModeKernels(const QuadratureRule& rule, Efficiency efficiency)
    : efficiency_(efficiency) {
  const double kappa = efficiency_.kappa();
  const auto nodes = rule.nodes();
  const auto log_weights = rule.log_weights();
  std::vector<double> kept_nodes;
  std::vector<double> kept_weights;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double weight = kappa * kappa * std::exp(log_weights[i] + std::log(nodes[i]));
    if (weight == 0.0) continue;
    kept_nodes.push_back(nodes[i]);
    kept_weights.push_back(weight);
  }
  const auto count = static_cast<Eigen::Index>(kept_nodes.size());
  nodes_ = Eigen::Map<const Eigen::ArrayXd>(kept_nodes.data(), count);
  scaled_weights_ = Eigen::Map<const Eigen::ArrayXd>(kept_weights.data(), count);
  root_kappa_t_ = (kappa * nodes_).sqrt();
}

Eigen::ArrayXd TwoModeKernels::cos_weights(const HomodyneSample& s) const {
  return scaled_weights_ * (2.0 * s.x() * root_kappa_t_).cos();
}

void TwoModeKernels::check(const HomodyneSample& s) const {
  require_two_modes(s, "TwoModeKernels");
  if (s.efficiency().eta() != efficiency_.eta()) {
    throw std::invalid_argument("TwoModeKernels: sample efficiency differs from kernel set");
  }
}

void TwoModeKernels::joint_photon(int nmax, const HomodyneSample& s,
                                  Eigen::Ref<Eigen::MatrixXd> out) const {
  check(s);
  require_photon_number(nmax, "joint_photon");
  const int rows = nmax + 1;
  const double kappa = efficiency_.kappa();
  const auto u = s.config().amplitudes();
  thread_local Eigen::ArrayXXd lag_a;
  thread_local Eigen::ArrayXXd lag_b;
  laguerre_columns(0.0, (kappa * u[0] * u[0]) * nodes(), rows, lag_a);
  laguerre_columns(0.0, (kappa * u[1] * u[1]) * nodes(), rows, lag_b);
  lag_b.colwise() *= cos_weights(s);
  out.noalias() = lag_a.matrix().transpose() * lag_b.matrix();
}

void TwoModeKernels::total_photon(const HomodyneSample& s, std::span<double> out) const {
  check(s);
  const int rows = static_cast<int>(out.size());
  if (rows == 0) return;
  require_photon_number(rows - 1, "total_photon");
  thread_local Eigen::ArrayXXd lag;
  laguerre_columns(1.0, efficiency_.kappa() * nodes(), rows, lag);
  Eigen::Map<Eigen::VectorXd>(out.data(), rows).noalias() =
      lag.matrix().transpose() * cos_weights(s).matrix();
}

void TwoModeKernels::twin_coherence(int nmax, const HomodyneSample& s,
                                    Eigen::Ref<Eigen::MatrixXcd> out) const {
  check(s);
  require_photon_number(nmax, "twin_coherence");
  const int size = nmax + 1;
  // sums(nu, d) = sum_i W_i t_i^d cos(2 sqrt(kappa t_i) x) L_nu^d(a t_i) L_nu^d(b t_i)
  thread_local Eigen::MatrixXd sums;
  thread_local Eigen::ArrayXXd lag_a;
  thread_local Eigen::ArrayXXd lag_b;
  thread_local Eigen::ArrayXd za;
  thread_local Eigen::ArrayXd zb;
  thread_local Eigen::ArrayXd w;
  sums.setZero(size, size);
  const double kappa = efficiency_.kappa();
  const auto u = s.config().amplitudes();
  const auto psi = s.config().psis();
  za = (kappa * u[0] * u[0]) * nodes();
  zb = (kappa * u[1] * u[1]) * nodes();
  w = cos_weights(s);
  for (int d = 0; d < size; ++d) {
    const int count = size - d;
    laguerre_columns(d, za, count, lag_a);
    laguerre_columns(d, zb, count, lag_b);
    sums.col(d).head(count) = ((lag_a * lag_b).colwise() * w).colwise().sum().transpose();
    w *= nodes();
  }
  const double cross = kappa * u[0] * u[1];
  const double psi_sum = psi[0] + psi[1];
  for (int n = 0; n < size; ++n) {
    for (int m = 0; m < size; ++m) {
      const int nu = std::min(n, m);
      const int mu = std::max(n, m);
      const int d = mu - nu;
      // prefactor (-i sqrt(kappa) u0)^d (-i sqrt(kappa) u1)^d nu!/mu!
      double value = sums(nu, d) * std::exp(log_factorial(nu) - log_factorial(mu));
      value *= (d % 2 == 0 ? 1.0 : -1.0) * std::pow(cross, d);
      out(n, m) = value * phase_factor((m - n) * psi_sum);
    }
  }
}

Eigen::Matrix2cd TwoModeKernels::single_photon_block(const HomodyneSample& s) const {
  check(s);
  const double kappa = efficiency_.kappa();
  const auto u = s.config().amplitudes();
  const auto psi = s.config().psis();
  thread_local Eigen::ArrayXd w;
  w = cos_weights(s);
  const double s0 = w.sum();
  const double s1 = (w * nodes_).sum();
  Eigen::Matrix2cd block;
  block(0, 0) = s0 - kappa * u[0] * u[0] * s1;
  block(1, 1) = s0 - kappa * u[1] * u[1] * s1;
  const double off = -kappa * u[0] * u[1] * s1;
  block(1, 0) = off * phase_factor(psi[1] - psi[0]);
  block(0, 1) = off * phase_factor(psi[0] - psi[1]);
  return block;
}

void ghz_projector_curve(std::span<const double> phis,
                         std::span<const Eigen::Matrix2cd> beam_blocks,
                         std::span<double> out) {
  if (beam_blocks.size() != 3) {
    throw std::invalid_argument("ghz_projector_curve: expected 3 beams");
  }
  if (out.size() != phis.size()) {
    throw std::invalid_argument("ghz_projector_curve: output size mismatch");
  }
  std::complex<double> p_oo{1.0}, p_ee{1.0}, p_eo{1.0}, p_oe{1.0};
  for (const auto& block : beam_blocks) {
    p_oo *= block(0, 0);
    p_ee *= block(1, 1);
    p_eo *= block(1, 0);
    p_oe *= block(0, 1);
  }
  for (std::size_t k = 0; k < phis.size(); ++k) {
    const auto total =
        p_oo + p_ee + phase_factor(-phis[k]) * p_eo + phase_factor(phis[k]) * p_oe;
    out[k] = 0.5 * total.real();
  }
}

}  // namespace hmt

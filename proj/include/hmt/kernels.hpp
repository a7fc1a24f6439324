// Unbiased homodyne estimators for multimode observables measured with a
// single local oscillator.
//
// Conventions: the measured quadrature is X = (A + A^dag)/2 with
// A = sum_l exp(-i psi_l) u_l(theta) a_l, where u_l are hyperspherical
// amplitudes. Averaging an estimator over homodyne events (x, theta, psi)
// drawn with LO settings distributed by the uniform-simplex / uniform-phase
// measure yields the quantum expectation of the observable.
//
// The same physical event is described by (x, psi) and (-x, psi + pi). Every
// estimator here is symmetrized over that pair, which removes imaginary parts
// that only vanish on average and makes matrix-element estimators Hermitian
// sample by sample.

#ifndef HMT_KERNELS_HPP
#define HMT_KERNELS_HPP

#include "hmt/specfun.hpp"

#include <Eigen/Core>

#include <complex>
#include <span>
#include <vector>

namespace hmt {

/// Detector quantum efficiency eta in (1/2, 1] with kappa = 2 eta / (2 eta - 1)
/// and smearing variance (1 - eta) / (4 eta).
class Efficiency {
 public:
  explicit Efficiency(double eta);

  double eta() const noexcept { return eta_; }
  double kappa() const noexcept { return kappa_; }
  double smear_variance() const noexcept { return smear_variance_; }

 private:
  double eta_;
  double kappa_;
  double smear_variance_;
};

/// Local-oscillator setting for M+1 modes: M polar angles in [0, pi/2] and
/// M+1 phases. Amplitudes are u_0 = cos t1, u_1 = sin t1 cos t2, ...,
/// u_M = sin t1 ... sin tM.
class LOConfig {
 public:
  LOConfig(std::vector<double> thetas, std::vector<double> psis);

  static LOConfig two_mode(double theta, double psi0, double psi1);

  int num_modes() const noexcept { return static_cast<int>(psis_.size()); }
  std::span<const double> thetas() const noexcept { return thetas_; }
  std::span<const double> psis() const noexcept { return psis_; }
  std::span<const double> amplitudes() const noexcept { return amplitudes_; }

 private:
  std::vector<double> thetas_;
  std::vector<double> psis_;
  std::vector<double> amplitudes_;
};

/// One quadrature outcome together with the setting it was measured at.
class HomodyneSample {
 public:
  HomodyneSample(double x, LOConfig config, Efficiency efficiency);

  double x() const noexcept { return x_; }
  const LOConfig& config() const noexcept { return config_; }
  const Efficiency& efficiency() const noexcept { return efficiency_; }
  int num_modes() const noexcept { return config_.num_modes(); }

 private:
  double x_;
  LOConfig config_;
  Efficiency efficiency_;
};

/// Photon numbers of the matrix element <{n}| rho |{m}>, i.e. the observable
/// |{m}><{n}|.
struct FockProjector {
  std::vector<int> n;
  std::vector<int> m;
};

/// Largest photon number accepted by the matrix-element estimators; beyond it
/// n! overflows a double.
inline constexpr int kMaxPhotonNumber = 170;

/// Estimator of <{n}| rho |{m}> for any number of modes.
std::complex<double> matrix_element_estimator(const FockProjector& proj,
                                              const HomodyneSample& s,
                                              const QuadratureRule& rule);

/// Estimator of the diagonal element <{n}| rho |{n}>; independent of the phases.
double diagonal_estimator(std::span<const int> n, const HomodyneSample& s,
                          const QuadratureRule& rule);

/// Estimator of the probability that the total photon number equals n.
/// Depends on x and eta only.
double total_photon_estimator(int n, const HomodyneSample& s, const QuadratureRule& rule);

/// Two-mode joint photon-number probability p(n, m).
double joint_photon_estimator(int n, int m, const HomodyneSample& s,
                              const QuadratureRule& rule);

/// Two-mode coherent-state overlap <alpha, beta| rho |alpha, beta> (no 1/pi^2
/// normalization):
///   kappa^2 Phi(2, 1/2; -kappa [x - cos(theta) Re(alpha* e^{i psi0})
///                                  - sin(theta) Re(beta* e^{i psi1})]^2).
double q_function_estimator(std::complex<double> alpha, std::complex<double> beta,
                            const HomodyneSample& s);

/// Moment generating function <z^N> of the two-mode total photon number, z in [0, 1].
double mgf_estimator(double z, const HomodyneSample& s);

/// <N> for two modes: 4x^2 + 2/kappa - 2.
double mean_photon_estimator(const HomodyneSample& s);

/// <N^2> for two modes: 8x^4 + (24/kappa - 20) x^2 + 6/kappa^2 - 10/kappa + 4.
double second_moment_estimator(const HomodyneSample& s);

/// Overlap <phi| rho |phi> with the three-beam state
/// (|1_o 1_o 1_o> + e^{i phi} |1_e 1_e 1_e>)/sqrt(2), from one event of three
/// independent two-mode (o, e) homodyne measurements.
double ghz_projector_estimator(double phi, std::span<const HomodyneSample> samples,
                               const QuadratureRule& rule);

/// Batched two-mode estimators sharing one quadrature pass per sample. Results
/// agree with the single-observable functions above to rounding.
class TwoModeKernels {
 public:
  TwoModeKernels(const QuadratureRule& rule, Efficiency efficiency);

  const Efficiency& efficiency() const noexcept { return efficiency_; }

  /// out(n, m) = joint_photon_estimator(n, m, s) for n, m <= nmax.
  void joint_photon(int nmax, const HomodyneSample& s, Eigen::Ref<Eigen::MatrixXd> out) const;

  /// out[n] = total_photon_estimator(n, s) for n < out.size().
  void total_photon(const HomodyneSample& s, std::span<double> out) const;

  /// out(n, m) estimates C_{n,m} = <m, m| rho |n, n> for n, m <= nmax.
  void twin_coherence(int nmax, const HomodyneSample& s,
                      Eigen::Ref<Eigen::MatrixXcd> out) const;

  /// out(b, k) estimates <b| rho |k> on the single-photon basis
  /// {|1,0>, |0,1>} of the two modes (index 0 = photon in mode 0).
  Eigen::Matrix2cd single_photon_block(const HomodyneSample& s) const;

 private:
  void check(const HomodyneSample& s) const;
  const Eigen::ArrayXd& nodes() const noexcept { return nodes_; }
  /// scaled_weights_ * cos(2 x sqrt(kappa t))
  Eigen::ArrayXd cos_weights(const HomodyneSample& s) const;

  Efficiency efficiency_;
  Eigen::ArrayXd nodes_;
  Eigen::ArrayXd root_kappa_t_;    // sqrt(kappa t_i)
  Eigen::ArrayXd scaled_weights_;  // kappa^2 w_i t_i
};

/// C(phi) for each phi in `phis` from one GHZ event, using per-beam
/// single-photon blocks; matches ghz_projector_estimator.
void ghz_projector_curve(std::span<const double> phis,
                         std::span<const Eigen::Matrix2cd> beam_blocks,
                         std::span<double> out);

}  // namespace hmt

#endif  // HMT_KERNELS_HPP

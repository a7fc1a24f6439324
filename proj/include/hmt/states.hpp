// Reference states with analytic oracles and seeded homodyne samplers.

#ifndef HMT_STATES_HPP
#define HMT_STATES_HPP

#include "hmt/kernels.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace hmt {

/// Two-mode squeezed vacuum (1 - |xi|^2)^(1/2) sum_n xi^n |n, n>, |xi| < 1.
class TwinBeamState {
 public:
  explicit TwinBeamState(std::complex<double> xi);

  /// State with mean photon number `nbar` per beam and arg(xi) = phase.
  static TwinBeamState from_nbar(double nbar, double phase = 0.0);

  std::complex<double> xi() const noexcept { return xi_; }
  double nbar() const noexcept { return nbar_; }

 private:
  std::complex<double> xi_;
  double nbar_;
};

/// Variance of the quadrature outcome at LO setting (theta, psi0, psi1):
///   [1 + |xi|^2 + 2|xi| sin 2theta cos(psi0 + psi1 - arg xi)] / [4 (1 - |xi|^2)]
///   + (1 - eta) / (4 eta).
double twin_beam_variance(const TwinBeamState& state, double theta, double psi0, double psi1,
                          const Efficiency& eff);

/// Exact photon statistics of a twin-beam state.
class TwinBeamOracles {
 public:
  explicit TwinBeamOracles(const TwinBeamState& state) : state_(state) {}

  /// p(n, m) = delta_nm (1 - |xi|^2) |xi|^{2n}
  double joint(int n, int m) const;
  /// Total photon number N = n_a + n_b: (1 - |xi|^2) |xi|^N for even N, else 0.
  double total(int N) const;
  /// C_{n,m} = <m, m| rho |n, n> = (1 - |xi|^2) xi^m conj(xi)^n
  std::complex<double> coherence(int n, int m) const;
  double mean_total() const;           // 2 nbar
  double second_moment_total() const;  // 8 nbar^2 + 4 nbar
  /// <z^N> = (1 - |xi|^2) / (1 - |xi|^2 z^2)
  double mgf(double z) const;
  /// <alpha, beta| rho |alpha, beta> = (1-|xi|^2) e^{-|alpha|^2-|beta|^2} |e^{xi alpha* beta*}|^2
  double q_function(std::complex<double> alpha, std::complex<double> beta) const;

 private:
  TwinBeamState state_;
};

inline TwinBeamOracles twin_beam_oracles(const TwinBeamState& state) {
  return TwinBeamOracles(state);
}

/// LO setting of one (o, e) polarization pair.
struct BeamSetting {
  double theta = 0.0;
  double psi_o = 0.0;
  double psi_e = 0.0;
};

/// Three-beam measurement of (|1_o 1_o 1_o> - |1_e 1_e 1_e>)/sqrt(2), one LO per beam.
struct GhzExperiment {
  std::array<BeamSetting, 3> beams;
  Efficiency efficiency{1.0};
};

/// Weights of the eight components of the ideal GHZ outcome density. Index
/// bit j set means beam j's photon sits in the measured mode (density
/// |psi_1|^2 for x_j); clear means it sits in the orthogonal mode (|psi_0|^2).
std::array<double, 8> ghz_mixture_weights(const GhzExperiment& exp);

/// Joint density of (x1, x2, x3) including the Gaussian efficiency smearing.
double ghz_joint_density(double x1, double x2, double x3, const GhzExperiment& exp);

/// C(phi) = (1 - cos phi) / 2
double ghz_overlap_theory(double phi);

/// Random LO setting for M+1 modes: uniform phases and (u_0^2 .. u_M^2)
/// uniform on the simplex.
LOConfig sample_lo_general(int M, std::uint64_t seed);

/// One two-mode homodyne event as stored on disk. theta = acos(cos2theta)/2.
struct TwoModeRecord {
  double x = 0.0;
  double cos2theta = 1.0;
  double psi0 = 0.0;
  double psi1 = 0.0;

  double theta() const;
  HomodyneSample to_sample(const Efficiency& eff) const;
  bool operator==(const TwoModeRecord&) const = default;
};

/// One GHZ event: three beams, each recorded as (x, cos2theta, psi_o, psi_e).
struct GhzEvent {
  std::array<TwoModeRecord, 3> beams;
  bool operator==(const GhzEvent&) const = default;
};

enum class SampleKind { TwinBeam, Ghz };

struct StateDescriptor {
  SampleKind kind = SampleKind::TwinBeam;
  std::complex<double> xi{0.0, 0.0};  // twin beam only
  double eta = 1.0;
};

/// Homodyne data plus what is needed to regenerate it.
class SampleSet {
 public:
  SampleSet(StateDescriptor descriptor, std::uint64_t seed, std::vector<TwoModeRecord> records);
  SampleSet(StateDescriptor descriptor, std::uint64_t seed, std::vector<GhzEvent> events);

  SampleKind kind() const noexcept { return descriptor_.kind; }
  const StateDescriptor& descriptor() const noexcept { return descriptor_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept;
  Efficiency efficiency() const { return Efficiency(descriptor_.eta); }

  const std::vector<TwoModeRecord>& twin_records() const noexcept { return twin_; }
  const std::vector<GhzEvent>& ghz_events() const noexcept { return ghz_; }

 private:
  StateDescriptor descriptor_;
  std::uint64_t seed_;
  std::vector<TwoModeRecord> twin_;
  std::vector<GhzEvent> ghz_;
};

/// Random streams are split into fixed blocks of events, each with its own
/// engine derived from (seed, block index), so output does not depend on the
/// thread count.
inline constexpr std::uint64_t kSamplerBlockSize = 1u << 14;

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream);

SampleSet sample_twin_beam(const TwinBeamState& state, const Efficiency& eff,
                           std::uint64_t count, std::uint64_t seed, int threads = 1);

/// Per event and beam: cos 2theta uniform on [-1, 1], both phases uniform,
/// then (x1, x2, x3) from the exact eight-component mixture plus independent
/// efficiency noise.
SampleSet sample_ghz(const Efficiency& eff, std::uint64_t count, std::uint64_t seed,
                     int threads = 1);

}  // namespace hmt

#endif  // HMT_STATES_HPP

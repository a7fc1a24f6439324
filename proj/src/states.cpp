#include "hmt/states.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>

namespace hmt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Runs fill(block_index, first, last) over the fixed block decomposition of
// [0, count), spreading blocks over `threads` workers.
template <class Fill>
void for_each_block(std::uint64_t count, int threads, Fill fill) {
  const std::uint64_t blocks = (count + kSamplerBlockSize - 1) / kSamplerBlockSize;
  auto run = [&](std::uint64_t worker, std::uint64_t workers) {
    for (std::uint64_t b = worker; b < blocks; b += workers) {
      const std::uint64_t first = b * kSamplerBlockSize;
      fill(b, first, std::min(count, first + kSamplerBlockSize));
    }
  };
  const std::uint64_t workers =
      std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, blocks));
  if (workers == 1) {
    run(0, 1);
    return;
  }
  std::vector<std::thread> pool;
  for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
  for (auto& t : pool) t.join();
}

void require_count(std::uint64_t count, const char* what) {
  if (count == 0) throw std::invalid_argument(std::string(what) + ": count must be positive");
}

// |psi_0|^2 and |psi_1|^2 for X = (a + a^dag)/2, convolved with N(0, smear).
double vacuum_density(double x, double smear) {
  const double v = 0.25 + smear;
  return std::exp(-x * x / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
}

double one_photon_density(double x, double smear) {
  const double v0 = 0.25;
  const double v = v0 + smear;
  const double mean = v0 * x / v;
  return 4.0 * vacuum_density(x, smear) * (mean * mean + v0 * smear / v);
}

}  // namespace

TwinBeamState::TwinBeamState(std::complex<double> xi) : xi_(xi) {
  const double r2 = std::norm(xi);
  if (!std::isfinite(r2) || !(r2 < 1.0)) {
    throw std::domain_error("TwinBeamState: |xi| must be < 1");
  }
  nbar_ = r2 / (1.0 - r2);
}

TwinBeamState TwinBeamState::from_nbar(double nbar, double phase) {
  if (!(nbar >= 0.0) || !std::isfinite(nbar)) {
    throw std::domain_error("TwinBeamState: nbar must be finite and nonnegative");
  }
  return TwinBeamState(std::polar(std::sqrt(nbar / (1.0 + nbar)), phase));
}

double twin_beam_variance(const TwinBeamState& state, double theta, double psi0, double psi1,
                          const Efficiency& eff) {
  const double r = std::abs(state.xi());
  const double r2 = r * r;
  const double relative = std::remainder(psi0 + psi1 - std::arg(state.xi()), kTwoPi);
  return (1.0 + r2 + 2.0 * r * std::sin(2.0 * theta) * std::cos(relative)) / (4.0 * (1.0 - r2)) +
         eff.smear_variance();
}

double TwinBeamOracles::joint(int n, int m) const {
  if (n < 0 || m < 0) throw std::invalid_argument("joint: negative photon number");
  if (n != m) return 0.0;
  const double r2 = std::norm(state_.xi());
  return (1.0 - r2) * std::pow(r2, n);
}

double TwinBeamOracles::total(int N) const {
  if (N < 0) throw std::invalid_argument("total: negative photon number");
  if (N % 2 != 0) return 0.0;
  const double r2 = std::norm(state_.xi());
  return (1.0 - r2) * std::pow(r2, N / 2);
}

std::complex<double> TwinBeamOracles::coherence(int n, int m) const {
  if (n < 0 || m < 0) throw std::invalid_argument("coherence: negative photon number");
  const auto xi = state_.xi();
  return (1.0 - std::norm(xi)) * std::pow(xi, m) * std::pow(std::conj(xi), n);
}

double TwinBeamOracles::mean_total() const { return 2.0 * state_.nbar(); }

double TwinBeamOracles::second_moment_total() const {
  const double nbar = state_.nbar();
  return 8.0 * nbar * nbar + 4.0 * nbar;
}

double TwinBeamOracles::mgf(double z) const {
  const double r2 = std::norm(state_.xi());
  return (1.0 - r2) / (1.0 - r2 * z * z);
}

double TwinBeamOracles::q_function(std::complex<double> alpha,
                                   std::complex<double> beta) const {
  const auto xi = state_.xi();
  const auto exponent = xi * std::conj(alpha) * std::conj(beta);
  return (1.0 - std::norm(xi)) * std::exp(-std::norm(alpha) - std::norm(beta) +
                                          2.0 * exponent.real());
}

std::array<double, 8> ghz_mixture_weights(const GhzExperiment& exp) {
  using cd = std::complex<double>;
  // Measured mode A = c_o a_o + c_e a_e, orthogonal mode B = -c_e* a_o + c_o* a_e,
  // so a_o^dag = c_o A^dag - c_e* B^dag and a_e^dag = c_e A^dag + c_o* B^dag.
  std::array<std::array<cd, 2>, 3> o_amp;  // [beam][A/B]
  std::array<std::array<cd, 2>, 3> e_amp;
  for (int j = 0; j < 3; ++j) {
    const auto& b = exp.beams[j];
    const cd c_o = std::polar(std::cos(b.theta), -b.psi_o);
    const cd c_e = std::polar(std::sin(b.theta), -b.psi_e);
    o_amp[j] = {c_o, -std::conj(c_e)};
    e_amp[j] = {c_e, std::conj(c_o)};
  }
  std::array<double, 8> weights{};
  for (int mask = 0; mask < 8; ++mask) {
    cd o_term{1.0}, e_term{1.0};
    for (int j = 0; j < 3; ++j) {
      const int slot = (mask >> j) & 1 ? 0 : 1;  // bit set: photon in A
      o_term *= o_amp[j][slot];
      e_term *= e_amp[j][slot];
    }
    weights[mask] = 0.5 * std::norm(o_term - e_term);
  }
  return weights;
}

double ghz_joint_density(double x1, double x2, double x3, const GhzExperiment& exp) {
  const double smear = exp.efficiency.smear_variance();
  const std::array<double, 3> xs{x1, x2, x3};
  std::array<std::array<double, 2>, 3> factor;  // [beam][A/B]
  for (int j = 0; j < 3; ++j) {
    factor[j] = {one_photon_density(xs[j], smear), vacuum_density(xs[j], smear)};
  }
  const auto weights = ghz_mixture_weights(exp);
  double density = 0.0;
  for (int mask = 0; mask < 8; ++mask) {
    double term = weights[mask];
    for (int j = 0; j < 3; ++j) term *= factor[j][(mask >> j) & 1 ? 0 : 1];
    density += term;
  }
  return density;
}

double ghz_overlap_theory(double phi) { return 0.5 * (1.0 - std::cos(phi)); }

LOConfig sample_lo_general(int M, std::uint64_t seed) {
  if (M < 1) throw std::invalid_argument("sample_lo_general: M must be >= 1");
  auto engine = substream(seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Spacings of sorted uniforms are uniform on the simplex.
  std::vector<double> cuts(M);
  for (auto& c : cuts) c = unit(engine);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> squares(M + 1);
  double previous = 0.0;
  for (int l = 0; l < M; ++l) {
    squares[l] = cuts[l] - previous;
    previous = cuts[l];
  }
  squares[M] = 1.0 - previous;

  std::vector<double> thetas(M);
  double remaining = 1.0;  // sin^2 t1 ... sin^2 t_l
  for (int l = 0; l < M; ++l) {
    const double ratio = remaining > 0.0 ? std::clamp(squares[l] / remaining, 0.0, 1.0) : 1.0;
    thetas[l] = std::acos(std::sqrt(ratio));
    remaining = std::max(0.0, remaining - squares[l]);
  }
  std::vector<double> psis(M + 1);
  for (auto& p : psis) p = kTwoPi * unit(engine);
  return LOConfig(std::move(thetas), std::move(psis));
}

double TwoModeRecord::theta() const { return 0.5 * std::acos(std::clamp(cos2theta, -1.0, 1.0)); }

HomodyneSample TwoModeRecord::to_sample(const Efficiency& eff) const {
  return HomodyneSample(x, LOConfig::two_mode(theta(), psi0, psi1), eff);
}

SampleSet::SampleSet(StateDescriptor descriptor, std::uint64_t seed,
                     std::vector<TwoModeRecord> records)
    : descriptor_(descriptor), seed_(seed), twin_(std::move(records)) {
  if (descriptor_.kind != SampleKind::TwinBeam) {
    throw std::invalid_argument("SampleSet: two-mode records need a twin-beam descriptor");
  }
}

SampleSet::SampleSet(StateDescriptor descriptor, std::uint64_t seed, std::vector<GhzEvent> events)
    : descriptor_(descriptor), seed_(seed), ghz_(std::move(events)) {
  if (descriptor_.kind != SampleKind::Ghz) {
    throw std::invalid_argument("SampleSet: GHZ events need a GHZ descriptor");
  }
}

std::size_t SampleSet::size() const noexcept {
  return descriptor_.kind == SampleKind::TwinBeam ? twin_.size() : ghz_.size();
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

SampleSet sample_twin_beam(const TwinBeamState& state, const Efficiency& eff,
                           std::uint64_t count, std::uint64_t seed, int threads) {
  require_count(count, "sample_twin_beam");
  std::vector<TwoModeRecord> records(count);
  for_each_block(count, threads, [&](std::uint64_t block, std::uint64_t first,
                                     std::uint64_t last) {
    auto engine = substream(seed, block);
    std::uniform_real_distribution<double> cos2(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::uint64_t i = first; i < last; ++i) {
      auto& r = records[i];
      r.cos2theta = cos2(engine);
      r.psi0 = phase(engine);
      r.psi1 = phase(engine);
      const double variance = twin_beam_variance(state, r.theta(), r.psi0, r.psi1, eff);
      r.x = std::sqrt(variance) * normal(engine);
    }
  });
  StateDescriptor descriptor{SampleKind::TwinBeam, state.xi(), eff.eta()};
  return SampleSet(descriptor, seed, std::move(records));
}

SampleSet sample_ghz(const Efficiency& eff, std::uint64_t count, std::uint64_t seed,
                     int threads) {
  require_count(count, "sample_ghz");
  std::vector<GhzEvent> events(count);
  const double noise = std::sqrt(eff.smear_variance());
  for_each_block(count, threads, [&](std::uint64_t block, std::uint64_t first,
                                     std::uint64_t last) {
    auto engine = substream(seed, block);
    std::uniform_real_distribution<double> cos2(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::uint64_t i = first; i < last; ++i) {
      auto& event = events[i];
      GhzExperiment setting{{}, eff};
      for (int j = 0; j < 3; ++j) {
        auto& r = event.beams[j];
        r.cos2theta = cos2(engine);
        r.psi0 = phase(engine);
        r.psi1 = phase(engine);
        setting.beams[j] = {r.theta(), r.psi0, r.psi1};
      }
      const auto weights = ghz_mixture_weights(setting);
      double pick = unit(engine);
      int mask = 7;
      for (int k = 0; k < 8; ++k) {
        if (pick < weights[k]) {
          mask = k;
          break;
        }
        pick -= weights[k];
      }
      for (int j = 0; j < 3; ++j) {
        double ideal;
        if ((mask >> j) & 1) {
          // |psi_1|^2 ~ x^2 exp(-2x^2): radius of a 3-d Gaussian with variance 1/4.
          const double g1 = normal(engine), g2 = normal(engine), g3 = normal(engine);
          const double radius = 0.5 * std::sqrt(g1 * g1 + g2 * g2 + g3 * g3);
          ideal = unit(engine) < 0.5 ? -radius : radius;
        } else {
          ideal = 0.5 * normal(engine);
        }
        event.beams[j].x = ideal + noise * normal(engine);
      }
    }
  });
  StateDescriptor descriptor{SampleKind::Ghz, {0.0, 0.0}, eff.eta()};
  return SampleSet(descriptor, seed, std::move(events));
}

}  // namespace hmt

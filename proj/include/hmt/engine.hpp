// Monte-Carlo averaging of estimators over a sample set.
//
// A pass splits the data into contiguous partitions, accumulates every
// observable per partition and merges the partitions in index order. The
// result depends on the partition count but not on the number of threads.
// Observables evaluated on the same data have correlated errors.

#ifndef HMT_ENGINE_HPP
#define HMT_ENGINE_HPP

#include "hmt/kernels.hpp"
#include "hmt/states.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmt {

/// Running mean and sum of squared deviations (Welford).
struct Accumulator {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  /// Throws std::domain_error for a non-finite value.
  void add(double value);
};

Accumulator accumulate(Accumulator acc, double value);

/// Same as accumulating both streams one after the other.
Accumulator merge(const Accumulator& a, const Accumulator& b);

/// Mean with standard error sqrt(m2 / (count (count - 1))).
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t count = 0;
};

/// Requires count >= 2.
Estimate estimate(const Accumulator& acc);

/// Row key of an output value, e.g. {"p", n, m} or {"C_phi", phi, 0}.
struct Label {
  std::string observable;
  double param1 = 0.0;
  double param2 = 0.0;
};

/// What an observable sees while one sample is processed.
struct EvalContext {
  const QuadratureRule& rule;
  const TwoModeKernels& kernels;
};

/// A group of real outputs computed together from one event. Complex
/// quantities appear as separate real and imaginary outputs.
class ObservableFamily {
 public:
  virtual ~ObservableFamily() = default;

  virtual SampleKind kind() const = 0;
  virtual std::vector<Label> labels() const = 0;

  /// `out` has labels().size() entries.
  virtual void evaluate_twin(const HomodyneSample& s, const EvalContext& ctx,
                             std::span<double> out) const;
  virtual void evaluate_ghz(std::span<const HomodyneSample> beams, const EvalContext& ctx,
                            std::span<double> out) const;
};

using ObservablePtr = std::shared_ptr<const ObservableFamily>;

/// p(n, m) for n, m <= nmax, labelled "p".
ObservablePtr joint_photon_family(int nmax);
/// p(N) for N <= nmax, labelled "pN".
ObservablePtr total_photon_family(int nmax);
/// Re and Im of C_{n,m} for n, m <= nmax, labelled "C_re" and "C_im".
ObservablePtr coherence_family(int nmax);
/// <N> and <N^2>, labelled "mean_N" and "mean_N2".
ObservablePtr moments_family();
/// <z^N> for each z, labelled "mgf".
ObservablePtr mgf_family(std::vector<double> zs);
/// GHZ overlap C(phi) for each phi, labelled "C_phi".
ObservablePtr ghz_overlap_family(std::vector<double> phis);

/// Any single two-mode estimator.
ObservablePtr custom_twin_observable(
    Label label, std::function<double(const HomodyneSample&, const QuadratureRule&)> f);

struct EvaluationPlan {
  int partitions = 1;
  int threads = 1;
};

/// A kernel or accumulator failure at a given event.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::uint64_t sample_index, const std::string& what);
  std::uint64_t sample_index() const noexcept { return index_; }

 private:
  std::uint64_t index_;
};

struct EvaluationResult {
  std::vector<Label> labels;
  std::vector<Accumulator> accumulators;
  std::vector<Estimate> estimates;
  EvaluationPlan plan;

  /// Index of the first output with the given label; throws if absent.
  std::size_t find(const std::string& observable, double param1 = 0.0,
                   double param2 = 0.0) const;
  const Estimate& at(const std::string& observable, double param1 = 0.0,
                     double param2 = 0.0) const {
    return estimates[find(observable, param1, param2)];
  }
};

/// One pass over `data`. Every observable must match the data kind and the
/// set needs at least two events.
EvaluationResult evaluate(const SampleSet& data, std::span<const ObservablePtr> observables,
                          const QuadratureRule& rule, EvaluationPlan plan = {});

/// Everything needed to trace a results file back to its inputs.
struct RunManifest {
  std::string command;
  StateDescriptor state;
  std::uint64_t seed = 0;
  std::uint64_t count = 0;
  int quadrature_order = kDefaultQuadratureOrder;
  EvaluationPlan plan;
  std::string samples_file;    // empty when the data never touched disk
  std::string samples_sha256;
};

/// Version string recorded in manifests.
std::string library_version();

/// CSV with header `observable,param1,param2,value,std_error,count`.
void write_results_csv(const std::filesystem::path& path, const EvaluationResult& result);

/// JSON manifest next to results, including the error-bar definition.
void write_run_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace hmt

#endif  // HMT_ENGINE_HPP

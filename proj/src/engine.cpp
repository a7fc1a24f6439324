#include "hmt/engine.hpp"

#include "hmt/sample_io.hpp"

#include <fmt/format.h>

#include "json.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#ifndef HMT_VERSION
#define HMT_VERSION "unknown"
#endif

namespace hmt {

void Accumulator::add(double value) {
  if (!std::isfinite(value)) {
    throw std::domain_error(fmt::format("non-finite value {}", value));
  }
  ++count;
  const double delta = value - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (value - mean);
}

Accumulator accumulate(Accumulator acc, double value) {
  acc.add(value);
  return acc;
}

Accumulator merge(const Accumulator& a, const Accumulator& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  Accumulator out;
  out.count = a.count + b.count;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = static_cast<double>(out.count);
  const double delta = b.mean - a.mean;
  out.mean = (na * a.mean + nb * b.mean) / n;
  out.m2 = a.m2 + b.m2 + delta * delta * na * nb / n;
  return out;
}

Estimate estimate(const Accumulator& acc) {
  if (acc.count < 2) {
    throw std::domain_error("estimate: need at least two values for a standard error");
  }
  const double n = static_cast<double>(acc.count);
  return {acc.mean, std::sqrt(acc.m2 / (n * (n - 1.0))), acc.count};
}

void ObservableFamily::evaluate_twin(const HomodyneSample&, const EvalContext&,
                                     std::span<double>) const {
  throw std::logic_error("observable does not accept two-mode samples");
}

void ObservableFamily::evaluate_ghz(std::span<const HomodyneSample>, const EvalContext&,
                                    std::span<double>) const {
  throw std::logic_error("observable does not accept GHZ events");
}

namespace {

void require_order(int nmax, const char* what) {
  if (nmax < 0 || nmax > kMaxPhotonNumber) {
    throw std::invalid_argument(fmt::format("{}: nmax must lie in [0, {}], got {}", what,
                                            kMaxPhotonNumber, nmax));
  }
}

class JointPhoton final : public ObservableFamily {
 public:
  explicit JointPhoton(int nmax) : nmax_(nmax) { require_order(nmax, "joint_photon_family"); }
  SampleKind kind() const override { return SampleKind::TwinBeam; }
  std::vector<Label> labels() const override {
    std::vector<Label> out;
    for (int n = 0; n <= nmax_; ++n) {
      for (int m = 0; m <= nmax_; ++m) out.push_back({"p", double(n), double(m)});
    }
    return out;
  }
  void evaluate_twin(const HomodyneSample& s, const EvalContext& ctx,
                     std::span<double> out) const override {
    // row-major (n, m) matches labels()
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(
        out.data(), nmax_ + 1, nmax_ + 1);
    thread_local Eigen::MatrixXd scratch;
    scratch.resize(nmax_ + 1, nmax_ + 1);
    ctx.kernels.joint_photon(nmax_, s, scratch);
    view = scratch;
  }

 private:
  int nmax_;
};

class TotalPhoton final : public ObservableFamily {
 public:
  explicit TotalPhoton(int nmax) : nmax_(nmax) { require_order(nmax, "total_photon_family"); }
  SampleKind kind() const override { return SampleKind::TwinBeam; }
  std::vector<Label> labels() const override {
    std::vector<Label> out;
    for (int n = 0; n <= nmax_; ++n) out.push_back({"pN", double(n), 0.0});
    return out;
  }
  void evaluate_twin(const HomodyneSample& s, const EvalContext& ctx,
                     std::span<double> out) const override {
    ctx.kernels.total_photon(s, out);
  }

 private:
  int nmax_;
};

class Coherence final : public ObservableFamily {
 public:
  explicit Coherence(int nmax) : nmax_(nmax) { require_order(nmax, "coherence_family"); }
  SampleKind kind() const override { return SampleKind::TwinBeam; }
  std::vector<Label> labels() const override {
    std::vector<Label> out;
    for (const char* part : {"C_re", "C_im"}) {
      for (int n = 0; n <= nmax_; ++n) {
        for (int m = 0; m <= nmax_; ++m) out.push_back({part, double(n), double(m)});
      }
    }
    return out;
  }
  void evaluate_twin(const HomodyneSample& s, const EvalContext& ctx,
                     std::span<double> out) const override {
    const int size = nmax_ + 1;
    thread_local Eigen::MatrixXcd scratch;
    scratch.resize(size, size);
    ctx.kernels.twin_coherence(nmax_, s, scratch);
    const std::size_t half = static_cast<std::size_t>(size * size);
    for (int n = 0; n < size; ++n) {
      for (int m = 0; m < size; ++m) {
        out[n * size + m] = scratch(n, m).real();
        out[half + n * size + m] = scratch(n, m).imag();
      }
    }
  }

 private:
  int nmax_;
};

class Moments final : public ObservableFamily {
 public:
  SampleKind kind() const override { return SampleKind::TwinBeam; }
  std::vector<Label> labels() const override { return {{"mean_N", 0, 0}, {"mean_N2", 0, 0}}; }
  void evaluate_twin(const HomodyneSample& s, const EvalContext&,
                     std::span<double> out) const override {
    out[0] = mean_photon_estimator(s);
    out[1] = second_moment_estimator(s);
  }
};

class Mgf final : public ObservableFamily {
 public:
  explicit Mgf(std::vector<double> zs) : zs_(std::move(zs)) {
    for (double z : zs_) {
      if (!(z >= 0.0 && z <= 1.0)) {
        throw std::invalid_argument(fmt::format("mgf_family: z = {} outside [0, 1]", z));
      }
    }
  }
  SampleKind kind() const override { return SampleKind::TwinBeam; }
  std::vector<Label> labels() const override {
    std::vector<Label> out;
    for (double z : zs_) out.push_back({"mgf", z, 0.0});
    return out;
  }
  void evaluate_twin(const HomodyneSample& s, const EvalContext&,
                     std::span<double> out) const override {
    for (std::size_t k = 0; k < zs_.size(); ++k) out[k] = mgf_estimator(zs_[k], s);
  }

 private:
  std::vector<double> zs_;
};

class GhzOverlap final : public ObservableFamily {
 public:
  explicit GhzOverlap(std::vector<double> phis) : phis_(std::move(phis)) {
    for (double phi : phis_) {
      if (!std::isfinite(phi)) throw std::invalid_argument("ghz_overlap_family: phi not finite");
    }
  }
  SampleKind kind() const override { return SampleKind::Ghz; }
  std::vector<Label> labels() const override {
    std::vector<Label> out;
    for (double phi : phis_) out.push_back({"C_phi", phi, 0.0});
    return out;
  }
  void evaluate_ghz(std::span<const HomodyneSample> beams, const EvalContext& ctx,
                    std::span<double> out) const override {
    std::array<Eigen::Matrix2cd, 3> blocks;
    for (int j = 0; j < 3; ++j) blocks[j] = ctx.kernels.single_photon_block(beams[j]);
    ghz_projector_curve(phis_, blocks, out);
  }

 private:
  std::vector<double> phis_;
};

class CustomTwin final : public ObservableFamily {
 public:
  CustomTwin(Label label, std::function<double(const HomodyneSample&, const QuadratureRule&)> f)
      : label_(std::move(label)), f_(std::move(f)) {}
  SampleKind kind() const override { return SampleKind::TwinBeam; }
  std::vector<Label> labels() const override { return {label_}; }
  void evaluate_twin(const HomodyneSample& s, const EvalContext& ctx,
                     std::span<double> out) const override {
    out[0] = f_(s, ctx.rule);
  }

 private:
  Label label_;
  std::function<double(const HomodyneSample&, const QuadratureRule&)> f_;
};

struct Binding {
  const ObservableFamily* family;
  std::size_t offset;
  std::size_t size;
};

std::vector<Accumulator> run_partition(const SampleSet& data, const std::vector<Binding>& bindings,
                                       std::size_t outputs, const EvalContext& ctx,
                                       std::uint64_t first, std::uint64_t last) {
  std::vector<Accumulator> acc(outputs);
  std::vector<double> values(outputs);
  const Efficiency eff = data.efficiency();
  const bool twin = data.kind() == SampleKind::TwinBeam;
  for (std::uint64_t i = first; i < last; ++i) {
    try {
      if (twin) {
        const HomodyneSample s = data.twin_records()[i].to_sample(eff);
        for (const auto& b : bindings) {
          b.family->evaluate_twin(s, ctx, std::span<double>(values).subspan(b.offset, b.size));
        }
      } else {
        const auto& event = data.ghz_events()[i];
        const std::array<HomodyneSample, 3> beams{event.beams[0].to_sample(eff),
                                                  event.beams[1].to_sample(eff),
                                                  event.beams[2].to_sample(eff)};
        for (const auto& b : bindings) {
          b.family->evaluate_ghz(beams, ctx, std::span<double>(values).subspan(b.offset, b.size));
        }
      }
      for (std::size_t k = 0; k < outputs; ++k) acc[k].add(values[k]);
    } catch (const std::exception& e) {
      throw EvaluationError(i, e.what());
    }
  }
  return acc;
}

}  // namespace

ObservablePtr joint_photon_family(int nmax) { return std::make_shared<JointPhoton>(nmax); }
ObservablePtr total_photon_family(int nmax) { return std::make_shared<TotalPhoton>(nmax); }
ObservablePtr coherence_family(int nmax) { return std::make_shared<Coherence>(nmax); }
ObservablePtr moments_family() { return std::make_shared<Moments>(); }
ObservablePtr mgf_family(std::vector<double> zs) { return std::make_shared<Mgf>(std::move(zs)); }
ObservablePtr ghz_overlap_family(std::vector<double> phis) {
  return std::make_shared<GhzOverlap>(std::move(phis));
}
ObservablePtr custom_twin_observable(
    Label label, std::function<double(const HomodyneSample&, const QuadratureRule&)> f) {
  return std::make_shared<CustomTwin>(std::move(label), std::move(f));
}

EvaluationError::EvaluationError(std::uint64_t sample_index, const std::string& what)
    : std::runtime_error(fmt::format("sample {}: {}", sample_index, what)),
      index_(sample_index) {}

std::size_t EvaluationResult::find(const std::string& observable, double param1,
                                   double param2) const {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto& l = labels[k];
    if (l.observable == observable && l.param1 == param1 && l.param2 == param2) return k;
  }
  throw std::out_of_range(
      fmt::format("no output {}({}, {})", observable, param1, param2));
}

EvaluationResult evaluate(const SampleSet& data, std::span<const ObservablePtr> observables,
                          const QuadratureRule& rule, EvaluationPlan plan) {
  if (observables.empty()) throw std::invalid_argument("evaluate: no observables");
  if (data.size() < 2) throw std::invalid_argument("evaluate: need at least two samples");
  if (plan.partitions < 1 || plan.threads < 1) {
    throw std::invalid_argument("evaluate: partitions and threads must be positive");
  }

  EvaluationResult result;
  result.plan = plan;
  std::vector<Binding> bindings;
  for (const auto& obs : observables) {
    if (!obs) throw std::invalid_argument("evaluate: null observable");
    if (obs->kind() != data.kind()) {
      throw std::invalid_argument("evaluate: observable arity does not match the sample set");
    }
    auto labels = obs->labels();
    bindings.push_back({obs.get(), result.labels.size(), labels.size()});
    result.labels.insert(result.labels.end(), labels.begin(), labels.end());
  }
  const std::size_t outputs = result.labels.size();

  const TwoModeKernels kernels(rule, data.efficiency());
  const EvalContext ctx{rule, kernels};
  const std::uint64_t n = data.size();
  const std::uint64_t parts = std::min<std::uint64_t>(plan.partitions, n);
  std::vector<std::vector<Accumulator>> partial(parts);
  std::vector<std::exception_ptr> errors(parts);

  auto work = [&](std::uint64_t worker, std::uint64_t workers) {
    for (std::uint64_t p = worker; p < parts; p += workers) {
      try {
        partial[p] = run_partition(data, bindings, outputs, ctx, p * n / parts,
                                   (p + 1) * n / parts);
      } catch (...) {
        errors[p] = std::current_exception();
      }
    }
  };
  const std::uint64_t workers = std::min<std::uint64_t>(plan.threads, parts);
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  result.accumulators.assign(outputs, Accumulator{});
  for (const auto& part : partial) {
    for (std::size_t k = 0; k < outputs; ++k) {
      result.accumulators[k] = merge(result.accumulators[k], part[k]);
    }
  }
  for (const auto& acc : result.accumulators) result.estimates.push_back(estimate(acc));
  return result;
}

std::string library_version() { return HMT_VERSION; }

void write_results_csv(const std::filesystem::path& path, const EvaluationResult& result) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  fmt::memory_buffer buffer;
  fmt::format_to(std::back_inserter(buffer), "observable,param1,param2,value,std_error,count\n");
  for (std::size_t k = 0; k < result.labels.size(); ++k) {
    const auto& l = result.labels[k];
    const auto& e = result.estimates[k];
    fmt::format_to(std::back_inserter(buffer), "{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n",
                   l.observable, l.param1, l.param2, e.value, e.std_error, e.count);
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_run_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = library_version();
  j["state"] = m.state.kind == SampleKind::TwinBeam ? "twin_beam" : "ghz";
  if (m.state.kind == SampleKind::TwinBeam) {
    j["xi_re"] = m.state.xi.real();
    j["xi_im"] = m.state.xi.imag();
    j["nbar"] = TwinBeamState(m.state.xi).nbar();
  }
  j["eta"] = m.state.eta;
  j["seed"] = m.seed;
  j["count"] = m.count;
  j["quadrature_order"] = m.quadrature_order;
  j["partitions"] = m.plan.partitions;
  j["threads"] = m.plan.threads;
  if (!m.samples_file.empty()) {
    j["samples_file"] = m.samples_file;
    j["samples_sha256"] = m.samples_sha256;
  }
  j["std_error"] = "standard error of the mean, sqrt(m2 / (n (n - 1)))";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace hmt

// Command-line front end and the figure pipelines behind it.

#ifndef HMT_CLI_HPP
#define HMT_CLI_HPP

#include "hmt/engine.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hmt::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationError = 1,
  kStatisticalFailure = 2,
  kIoFailure = 3,
};

/// Shared knobs of every pipeline run.
struct PipelineOptions {
  std::uint64_t seed = 1;
  /// Replaces each series' default sample count; series that use a multiple
  /// of the base count keep the multiple.
  std::optional<std::uint64_t> samples;
  int quadrature_order = kDefaultQuadratureOrder;
  EvaluationPlan plan;
};

/// Sample a twin-beam dataset and evaluate `observables` on it in one pass.
EvaluationResult twin_experiment(const TwinBeamState& state, double eta, std::uint64_t count,
                                 std::uint64_t seed, std::span<const ObservablePtr> observables,
                                 const PipelineOptions& options);

EvaluationResult ghz_experiment(double eta, std::uint64_t count, std::uint64_t seed,
                                std::span<const ObservablePtr> observables,
                                const PipelineOptions& options);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct FigureOutput {
  std::vector<std::filesystem::path> files;
  std::vector<Check> checks;
  bool passed() const;
};

inline constexpr std::string_view kFigureNames[] = {"fig1", "fig2", "fig3", "fig4", "fig5"};

/// Runs one figure pipeline, writing CSV series and a manifest per series
/// into `out_dir`. Throws std::invalid_argument for an unknown name.
FigureOutput run_figure(std::string_view name, const PipelineOptions& options,
                        const std::filesystem::path& out_dir);

/// Self-consistency checks of kernels, special functions and samplers.
std::vector<Check> self_test(int quadrature_order, double eta, std::uint64_t seed);

/// Entry point of the `hmt` tool; returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hmt::cli

#endif  // HMT_CLI_HPP

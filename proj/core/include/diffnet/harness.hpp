#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "diffnet/algorithms.hpp"
#include "diffnet/network.hpp"
#include "diffnet/npdlms.hpp"
#include "diffnet/theory.hpp"

namespace diffnet::harness {

struct AlgorithmConfig {
  std::string label;
  std::variant<Baseline, NpdlmsParams> kind;
  double step = 0.0;
  Strategy strategy = Strategy::kCta;

  bool is_npdlms() const { return std::holds_alternative<NpdlmsParams>(kind); }
};

struct ExperimentConfig {
  Topology topology = Topology::build(1, {});
  CombinationRule rule = CombinationRule::kUniform;
  Vector theta_o;
  Drift environment = Stationary{};
  std::vector<Matrix> regressor_covariance;
  std::vector<NoiseSpec> noise;
  std::vector<AlgorithmConfig> algorithms;
  std::size_t iterations = 500;
  std::size_t realizations = 200;
  std::uint64_t base_seed = 1;
  /// 0 uses every hardware thread.
  std::size_t threads = 0;
  std::optional<std::filesystem::path> output_csv;

  std::size_t nodes() const { return topology.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(theta_o.size()); }
};

/// Throws Error(kConfigError) on any violated invariant.
void validate(const ExperimentConfig& config);

/// Parses the JSON experiment description; relative paths resolve against
/// the file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");

/// Default experiment: the canonical 16-node network, d = 5, theta_o = 1/sqrt(5).
ExperimentConfig reference_network_config(const std::filesystem::path& data_dir);

std::uint64_t realization_seed(std::uint64_t base_seed, std::size_t realization);

/// Outcome of one realization for one algorithm, linear scale.
struct RealizationTrace {
  std::vector<double> msd;
  std::vector<double> node_tail_msd;
  std::vector<std::size_t> updates;
  bool diverged = false;
};

struct RealizationResult {
  std::size_t index = 0;
  std::vector<RealizationTrace> algorithms;
};

/// Runs every configured algorithm on one shared measurement stream.
RealizationResult run_realization(const ExperimentConfig& config, std::size_t realization);

struct AlgorithmResult {
  std::string label;
  /// Ensemble-averaged network MSD for iterations 1..T, linear scale.
  std::vector<double> msd;
  std::vector<double> node_steady_msd;
  double steady_msd = 0.0;
  /// Mean number of gated updates per node and realization.
  double kappa = 0.0;
  std::vector<std::size_t> diverged_realizations;

  double msd_db(std::size_t iteration) const { return to_db(msd.at(iteration - 1)); }
  double steady_msd_db() const { return to_db(steady_msd); }
  double final_msd_db() const { return to_db(msd.back()); }
};

struct RunResult {
  std::size_t iterations = 0;
  std::size_t realizations = 0;
  std::vector<AlgorithmResult> algorithms;
  double wall_seconds = 0.0;

  const AlgorithmResult& get(const std::string& label) const;
};

/// Number of trailing iterations averaged for steady-state figures (20%).
std::size_t steady_window(std::size_t iterations);

RunResult run_experiment(const ExperimentConfig& config);

/// `iteration,<label>_msd_db,...`, one row per iteration.
void export_csv(const RunResult& result, const std::filesystem::path& path);
std::string to_csv(const RunResult& result);

enum class SweepParameter { kEta, kH, kDelta, kSigma };

SweepParameter parse_sweep_parameter(const std::string& name);
std::string to_string(SweepParameter parameter);

/// One experiment per value with a shared base seed. Applies to every NPDLMS entry.
std::vector<RunResult> sweep(const ExperimentConfig& config, SweepParameter parameter,
                             const std::vector<double>& values);

/// `param_value,iteration,<label>_msd_db,...` over every sweep point.
std::string sweep_csv(const std::vector<RunResult>& results, const std::vector<double>& values);

/// Per-iteration node estimates of one algorithm, [iteration][node].
std::vector<std::vector<Vector>> record_trace(const ExperimentConfig& config, std::size_t algorithm,
                                              std::size_t realization);

/// Linearized-model inputs for one NPDLMS entry. Requires Gaussian noise.
theory::TheoryInputs theory_inputs(const ExperimentConfig& config, std::size_t algorithm);

std::unique_ptr<DiffusionFilter> make_filter(const ExperimentConfig& config, const AlgorithmConfig& algorithm,
                                             const CombinationMatrix& weights);

}  // namespace diffnet::harness

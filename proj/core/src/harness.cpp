#include "diffnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "format.hpp"

namespace diffnet::harness {

namespace {

constexpr double kDivergenceMsd = 1e6;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<NodeProfile> make_profiles(const ExperimentConfig& config) {
  std::vector<NodeProfile> profiles;
  profiles.reserve(config.nodes());
  for (std::size_t k = 0; k < config.nodes(); ++k) {
    profiles.emplace_back(config.regressor_covariance[k], config.noise[k]);
  }
  return profiles;
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

ExperimentConfig with_parameter(ExperimentConfig config, SweepParameter parameter, double value) {
  for (auto& alg : config.algorithms) {
    auto* p = std::get_if<NpdlmsParams>(&alg.kind);
    if (!p) continue;
    switch (parameter) {
      case SweepParameter::kEta: p->gate.eta = value; break;
      case SweepParameter::kH: p->kernel.h = value; break;
      case SweepParameter::kDelta: p->kernel.delta = value; break;
      case SweepParameter::kSigma: p->kernel.sigma = value; break;
    }
  }
  return config;
}

}  // namespace

void validate(const ExperimentConfig& config) {
  const std::size_t n = config.nodes();
  if (config.iterations < 1) throw Error(ErrorCode::kConfigError, "iterations must be >= 1");
  if (config.realizations < 1) throw Error(ErrorCode::kConfigError, "realizations must be >= 1");
  if (config.theta_o.size() == 0) throw Error(ErrorCode::kConfigError, "theta_o is empty");
  if (config.regressor_covariance.size() != n || config.noise.size() != n) {
    throw Error(ErrorCode::kConfigError, "need one regressor covariance and noise law per node");
  }
  for (const auto& r : config.regressor_covariance) {
    if (r.rows() != config.theta_o.size() || r.cols() != config.theta_o.size()) {
      throw Error(ErrorCode::kConfigError, "regressor covariance size differs from d");
    }
  }
  if (config.algorithms.empty()) throw Error(ErrorCode::kConfigError, "no algorithms configured");
  for (const auto& alg : config.algorithms) {
    if (!(alg.step > 0.0) || !std::isfinite(alg.step)) {
      throw Error(ErrorCode::kConfigError, "algorithm '" + alg.label + "' needs a positive step size");
    }
    if (alg.label.empty()) throw Error(ErrorCode::kConfigError, "algorithm label is empty");
  }
  try {
    for (const auto& noise : config.noise) diffnet::validate(noise);
    for (const auto& alg : config.algorithms) {
      if (const auto* b = std::get_if<Baseline>(&alg.kind)) diffnet::validate(*b);
      if (const auto* p = std::get_if<NpdlmsParams>(&alg.kind)) {
        diffnet::validate(p->kernel);
        diffnet::validate(p->gate);
        if (p->buffer_length == 0) throw Error(ErrorCode::kInvalidParameters, "buffer length must be >= 1");
      }
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
}

std::uint64_t realization_seed(std::uint64_t base_seed, std::size_t realization) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(0xd1b54a32d192ed03ULL + realization));
}

std::unique_ptr<DiffusionFilter> make_filter(const ExperimentConfig& config, const AlgorithmConfig& algorithm,
                                             const CombinationMatrix& weights) {
  std::vector<double> steps(config.nodes(), algorithm.step);
  if (const auto* p = std::get_if<NpdlmsParams>(&algorithm.kind)) {
    NpdlmsParams params = *p;
    params.strategy = algorithm.strategy;
    return std::make_unique<NpdlmsFilter>(config.topology, weights, config.dimension(), params,
                                          std::move(steps));
  }
  return std::make_unique<BaselineFilter>(config.topology, weights, config.dimension(),
                                          std::get<Baseline>(algorithm.kind), std::move(steps),
                                          algorithm.strategy);
}

std::size_t steady_window(std::size_t iterations) { return std::max<std::size_t>(1, iterations / 5); }

RealizationResult run_realization(const ExperimentConfig& config, std::size_t realization) {
  const std::size_t n = config.nodes();
  const std::size_t t_max = config.iterations;
  const std::size_t tail = steady_window(t_max);
  const auto weights = combination_weights(config.topology, config.rule);
  const auto profiles = make_profiles(config);

  Rng rng(realization_seed(config.base_seed, realization));
  GroundTruth truth(config.theta_o, config.environment);

  std::vector<std::unique_ptr<DiffusionFilter>> filters;
  RealizationResult result;
  result.index = realization;
  for (const auto& alg : config.algorithms) {
    filters.push_back(make_filter(config, alg, weights));
    RealizationTrace trace;
    trace.msd.reserve(t_max);
    trace.node_tail_msd.assign(n, 0.0);
    result.algorithms.push_back(std::move(trace));
  }

  std::vector<Measurement> data(n);
  for (std::size_t it = 0; it < t_max; ++it) {
    const Vector theta_now = truth.step(rng);
    for (std::size_t k = 0; k < n; ++k) data[k] = generate_measurement(profiles[k], theta_now, rng);
    for (std::size_t a = 0; a < filters.size(); ++a) {
      filters[a]->iterate(data);
      auto& trace = result.algorithms[a];
      double sum = 0.0;
      const auto& est = filters[a]->estimates();
      for (std::size_t k = 0; k < n; ++k) {
        const double err = (theta_now - est[k]).squaredNorm();
        sum += err;
        if (it + tail >= t_max) trace.node_tail_msd[k] += err / static_cast<double>(tail);
      }
      const double msd = sum / static_cast<double>(n);
      trace.msd.push_back(msd);
      if (!std::isfinite(msd) || msd > kDivergenceMsd) trace.diverged = true;
    }
  }
  for (std::size_t a = 0; a < filters.size(); ++a) {
    auto& trace = result.algorithms[a];
    trace.updates.resize(n);
    for (std::size_t k = 0; k < n; ++k) trace.updates[k] = filters[a]->update_count(k);
  }
  return result;
}

const AlgorithmResult& RunResult::get(const std::string& label) const {
  for (const auto& a : algorithms) {
    if (a.label == label) return a;
  }
  throw Error(ErrorCode::kIndexOutOfRange, "no algorithm labelled '" + label + "'");
}

RunResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const std::size_t r_count = config.realizations;
  std::vector<std::optional<RealizationResult>> runs(r_count);
  std::vector<std::size_t> failed;
  std::string first_failure;
  std::mutex failure_lock;

  parallel_for(r_count, config.threads, [&](std::size_t r) {
    try {
      runs[r] = run_realization(config, r);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> guard(failure_lock);
      failed.push_back(r);
      if (first_failure.empty()) first_failure = e.what();
    }
  });
  if (!failed.empty()) {
    std::sort(failed.begin(), failed.end());
    std::ostringstream msg;
    msg << failed.size() << " realization(s) failed, first at index " << failed.front() << ": "
        << first_failure;
    throw Error(ErrorCode::kPartialFailure, msg.str());
  }

  const std::size_t n = config.nodes();
  const std::size_t t_max = config.iterations;
  const auto inv_r = 1.0 / static_cast<double>(r_count);
  RunResult result;
  result.iterations = t_max;
  result.realizations = r_count;
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    AlgorithmResult alg;
    alg.label = config.algorithms[a].label;
    alg.msd.assign(t_max, 0.0);
    alg.node_steady_msd.assign(n, 0.0);
    double updates = 0.0;
    // Fixed reduction order keeps results independent of the thread count.
    for (std::size_t r = 0; r < r_count; ++r) {
      const auto& trace = runs[r]->algorithms[a];
      for (std::size_t t = 0; t < t_max; ++t) alg.msd[t] += trace.msd[t] * inv_r;
      for (std::size_t k = 0; k < n; ++k) {
        alg.node_steady_msd[k] += trace.node_tail_msd[k] * inv_r;
        updates += static_cast<double>(trace.updates[k]);
      }
      if (trace.diverged) alg.diverged_realizations.push_back(r);
    }
    alg.kappa = updates / static_cast<double>(n * r_count);
    const std::size_t tail = steady_window(t_max);
    double steady = 0.0;
    for (std::size_t t = t_max - tail; t < t_max; ++t) steady += alg.msd[t];
    alg.steady_msd = steady / static_cast<double>(tail);
    result.algorithms.push_back(std::move(alg));
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (config.output_csv) export_csv(result, *config.output_csv);
  return result;
}

std::string to_csv(const RunResult& result) {
  if (result.algorithms.empty()) throw Error(ErrorCode::kConfigError, "no algorithms to export");
  std::string out = "iteration";
  for (const auto& a : result.algorithms) out += "," + a.label + "_msd_db";
  out += '\n';
  for (std::size_t t = 1; t <= result.iterations; ++t) {
    out += std::to_string(t);
    for (const auto& a : result.algorithms) out += "," + detail::format_double(a.msd_db(t));
    out += '\n';
  }
  return out;
}

void export_csv(const RunResult& result, const std::filesystem::path& path) {
  const std::string text = to_csv(result);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "eta") return SweepParameter::kEta;
  if (name == "h") return SweepParameter::kH;
  if (name == "delta") return SweepParameter::kDelta;
  if (name == "sigma") return SweepParameter::kSigma;
  throw Error(ErrorCode::kConfigError, "unknown sweep parameter '" + name + "' (eta, h, delta, sigma)");
}

std::string to_string(SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::kEta: return "eta";
    case SweepParameter::kH: return "h";
    case SweepParameter::kDelta: return "delta";
    case SweepParameter::kSigma: return "sigma";
  }
  return "?";
}

std::vector<RunResult> sweep(const ExperimentConfig& config, SweepParameter parameter,
                             const std::vector<double>& values) {
  if (std::none_of(config.algorithms.begin(), config.algorithms.end(),
                   [](const AlgorithmConfig& a) { return a.is_npdlms(); })) {
    throw Error(ErrorCode::kConfigError, "sweep needs at least one NPDLMS algorithm");
  }
  std::vector<RunResult> out;
  out.reserve(values.size());
  for (double v : values) {
    ExperimentConfig point = with_parameter(config, parameter, v);
    point.output_csv.reset();
    out.push_back(run_experiment(point));
  }
  return out;
}

std::string sweep_csv(const std::vector<RunResult>& results, const std::vector<double>& values) {
  if (results.empty() || results.size() != values.size()) {
    throw Error(ErrorCode::kConfigError, "one result per sweep value is required");
  }
  std::string out = "param_value,iteration";
  for (const auto& a : results.front().algorithms) out += "," + a.label + "_msd_db";
  out += '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string value = detail::format_double(values[i]);
    for (std::size_t t = 1; t <= results[i].iterations; ++t) {
      out += value + "," + std::to_string(t);
      for (const auto& a : results[i].algorithms) out += "," + detail::format_double(a.msd_db(t));
      out += '\n';
    }
  }
  return out;
}

std::vector<std::vector<Vector>> record_trace(const ExperimentConfig& config, std::size_t algorithm,
                                              std::size_t realization) {
  validate(config);
  if (algorithm >= config.algorithms.size()) throw Error(ErrorCode::kIndexOutOfRange, "no such algorithm");
  const auto weights = combination_weights(config.topology, config.rule);
  const auto profiles = make_profiles(config);
  Rng rng(realization_seed(config.base_seed, realization));
  GroundTruth truth(config.theta_o, config.environment);
  auto filter = make_filter(config, config.algorithms[algorithm], weights);
  std::vector<Measurement> data(config.nodes());
  std::vector<std::vector<Vector>> trace;
  trace.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Vector theta_now = truth.step(rng);
    for (std::size_t k = 0; k < config.nodes(); ++k) data[k] = generate_measurement(profiles[k], theta_now, rng);
    filter->iterate(data);
    trace.push_back(filter->estimates());
  }
  return trace;
}

theory::TheoryInputs theory_inputs(const ExperimentConfig& config, std::size_t algorithm) {
  if (algorithm >= config.algorithms.size()) throw Error(ErrorCode::kIndexOutOfRange, "no such algorithm");
  const auto& alg = config.algorithms[algorithm];
  const auto* params = std::get_if<NpdlmsParams>(&alg.kind);
  if (!params) throw Error(ErrorCode::kConfigError, "theory applies to NPDLMS entries only");
  std::vector<double> noise_variance;
  for (const auto& noise : config.noise) {
    const auto* g = std::get_if<GaussianNoise>(&noise);
    if (!g) throw Error(ErrorCode::kConfigError, "theory needs Gaussian noise with a finite variance");
    noise_variance.push_back(g->variance);
  }
  return theory::make_inputs(config.topology, combination_weights(config.topology, config.rule),
                             config.regressor_covariance, std::move(noise_variance),
                             std::vector<double>(config.nodes(), alg.step), params->kernel,
                             params->buffer_length, config.theta_o);
}

}  // namespace diffnet::harness

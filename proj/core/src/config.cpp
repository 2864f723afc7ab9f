#include <fstream>
#include <sstream>

#include <json.hpp>

#include "diffnet/harness.hpp"

namespace diffnet::harness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::kConfigError, what); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(std::string("bad value for '") + key + "'");
  }
}

Topology parse_topology(const json& j, const std::filesystem::path& base) {
  if (j.is_string()) return read_topology(resolve(base, j.get<std::string>()));
  if (!j.is_object()) fail("topology must be a file path or an object");
  if (j.contains("random")) {
    const json& r = j.at("random");
    return random_connected_topology(r.at("nodes").get<std::size_t>(), get_or<std::uint64_t>(r, "seed", 1),
                                     get_or(r, "radius", 0.35));
  }
  if (j.contains("file")) return read_topology(resolve(base, j.at("file").get<std::string>()));
  std::vector<Edge> edges;
  for (const auto& e : j.value("edges", json::array())) {
    if (!e.is_array() || e.size() != 2) fail("edges are [l, k] pairs");
    edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
  }
  return Topology::build(j.at("nodes").get<std::size_t>(), edges);
}

CombinationRule parse_rule(const std::string& name) {
  if (name == "uniform") return CombinationRule::kUniform;
  if (name == "metropolis") return CombinationRule::kMetropolis;
  fail("unknown combination rule '" + name + "'");
}

Vector parse_theta(const json& j, std::size_t d) {
  if (j.is_string()) {
    if (j.get<std::string>() != "normalized_ones") fail("theta_o must be \"normalized_ones\" or an array");
    return normalized_ones(d);
  }
  const auto values = j.get<std::vector<double>>();
  if (values.size() != d) fail("theta_o length differs from d");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Drift parse_environment(const json& j) {
  const std::string type = j.value("type", "stationary");
  if (type == "stationary") return Stationary{};
  if (type == "random_walk") {
    const double q = j.at("q_variance").get<double>();
    if (!(q >= 0.0)) fail("q_variance must be >= 0");
    return RandomWalk{q};
  }
  fail("unknown environment type '" + type + "'");
}

std::vector<double> parse_variances(const json& j, std::size_t n, const std::filesystem::path& base) {
  std::vector<double> out;
  if (j.is_number()) {
    out.assign(n, j.get<double>());
  } else if (j.is_string()) {
    out = read_variance_profile(resolve(base, j.get<std::string>()));
  } else if (j.is_array()) {
    out = j.get<std::vector<double>>();
  } else if (j.is_object()) {
    out = variance_profile(n, get_or<std::uint64_t>(j, "seed", 1), get_or(j, "min", 0.8), get_or(j, "max", 1.2));
  } else {
    fail("regressor_variance must be a number, array, file or {seed, min, max}");
  }
  if (out.size() != n) fail("regressor_variance needs one value per node");
  for (double v : out) {
    if (!(v > 0.0)) fail("regressor variances must be positive");
  }
  return out;
}

NoiseSpec parse_noise(const json& j, const Matrix& r, const Vector& theta_o) {
  const std::string type = j.value("type", "gaussian");
  if (type == "gaussian") {
    if (j.contains("variance")) return GaussianNoise{j.at("variance").get<double>()};
    if (j.contains("snr_db")) return GaussianNoise{noise_variance_from_snr(j.at("snr_db").get<double>(), r, theta_o)};
    fail("gaussian noise needs variance or snr_db");
  }
  if (type == "alpha_stable") {
    return AlphaStableNoise{get_or(j, "alpha", 2.0), get_or(j, "beta", 0.0), get_or(j, "gamma", 1.0),
                            get_or(j, "delta", 0.0)};
  }
  fail("unknown noise type '" + type + "'");
}

Strategy parse_strategy(const std::string& name) {
  if (name == "cta") return Strategy::kCta;
  if (name == "atc") return Strategy::kAtc;
  fail("unknown strategy '" + name + "'");
}

ThresholdParams parse_gate(const json& j, ThresholdParams gate) {
  gate.eta = get_or(j, "eta", gate.eta);
  gate.slope = get_or(j, "slope", gate.slope);
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "smooth") gate.mode = GateMode::kSmooth;
    else if (mode == "hard") gate.mode = GateMode::kHard;
    else fail("gate mode is smooth or hard");
  }
  return gate;
}

AlgorithmConfig parse_algorithm(const json& j, const ThresholdParams& gate) {
  AlgorithmConfig alg;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "npdlms") {
    NpdlmsParams p;
    p.kernel.sigma = get_or(j, "sigma", p.kernel.sigma);
    p.kernel.h = get_or(j, "h", p.kernel.h);
    p.kernel.delta = get_or(j, "delta", p.kernel.delta);
    p.buffer_length = get_or(j, "buffer", p.buffer_length);
    p.gate = j.contains("gate") ? parse_gate(j.at("gate"), gate) : gate;
    alg.kind = p;
  } else if (kind == "dlms") {
    alg.kind = Dlms{};
  } else if (kind == "dse_lms") {
    alg.kind = DseLms{};
  } else if (kind == "dmcc") {
    alg.kind = Dmcc{get_or(j, "kernel_width", Dmcc{}.kernel_width)};
  } else if (kind == "dlms_f") {
    alg.kind = DlmsF{get_or(j, "lambda", DlmsF{}.lambda)};
  } else if (kind == "dllad") {
    alg.kind = Dllad{get_or(j, "alpha_p", Dllad{}.alpha_p)};
  } else {
    fail("unknown algorithm kind '" + kind + "'");
  }
  if (!j.contains("step")) fail("algorithm '" + kind + "' has no step size");
  alg.step = j.at("step").get<double>();
  alg.label = j.value("label", kind);
  alg.strategy = parse_strategy(j.value("strategy", "cta"));
  if (auto* p = std::get_if<NpdlmsParams>(&alg.kind)) p->strategy = alg.strategy;
  return alg;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail("config root must be an object");
  ExperimentConfig config;
  try {
    if (!j.contains("topology")) fail("config has no topology");
    config.topology = parse_topology(j.at("topology"), base_dir);
    config.rule = parse_rule(j.value("combination", "uniform"));
    const std::size_t n = config.topology.size();
    const auto d = j.at("d").get<std::size_t>();
    if (d == 0) fail("d must be >= 1");
    config.theta_o = parse_theta(j.value("theta_o", json("normalized_ones")), d);
    config.environment = parse_environment(j.value("environment", json::object()));

    for (double v : parse_variances(j.value("regressor_variance", json(1.0)), n, base_dir)) {
      config.regressor_covariance.push_back(v * Matrix::Identity(static_cast<Eigen::Index>(d),
                                                                 static_cast<Eigen::Index>(d)));
    }
    json noise = j.value("noise", json::object());
    if (j.contains("snr_db") && noise.is_object() && !noise.contains("snr_db") && !noise.contains("variance")) {
      noise["snr_db"] = j.at("snr_db");
    }
    if (noise.is_array() && noise.size() != n) fail("per-node noise needs one entry per node");
    for (std::size_t k = 0; k < n; ++k) {
      const json& nk = noise.is_array() ? noise.at(k) : noise;
      config.noise.push_back(parse_noise(nk, config.regressor_covariance[k], config.theta_o));
    }

    const ThresholdParams gate = parse_gate(j.value("gate", json::object()), ThresholdParams{});
    for (const auto& a : j.value("algorithms", json::array())) config.algorithms.push_back(parse_algorithm(a, gate));

    config.iterations = get_or(j, "iterations", config.iterations);
    config.realizations = get_or(j, "realizations", config.realizations);
    config.base_seed = get_or(j, "base_seed", config.base_seed);
    config.threads = get_or(j, "threads", config.threads);
    if (j.contains("output") && j.at("output").contains("csv")) {
      config.output_csv = resolve(base_dir, j.at("output").at("csv").get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoError) throw;
    if (e.code() == ErrorCode::kConfigError) throw;
    fail(e.what());
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

ExperimentConfig reference_network_config(const std::filesystem::path& data_dir) {
  ExperimentConfig config;
  config.topology = read_topology(data_dir / "topology16.txt");
  config.theta_o = normalized_ones(5);
  for (double v : read_variance_profile(data_dir / "profile16.txt")) {
    const Matrix r = v * Matrix::Identity(5, 5);
    config.regressor_covariance.push_back(r);
    config.noise.push_back(GaussianNoise{noise_variance_from_snr(30.0, r, config.theta_o)});
  }
  if (config.regressor_covariance.size() != config.nodes()) fail("variance profile does not match the topology");
  auto add = [&](std::string label, std::variant<Baseline, NpdlmsParams> kind, double step) {
    config.algorithms.push_back(AlgorithmConfig{std::move(label), std::move(kind), step, Strategy::kCta});
  };
  add("dse_lms", Baseline{DseLms{}}, 0.2);
  add("dmcc", Baseline{Dmcc{}}, 0.1);
  add("dlms_f", Baseline{DlmsF{}}, 0.25);
  add("dlms", Baseline{Dlms{}}, 0.13);
  add("dllad", Baseline{Dllad{}}, 0.35);
  add("npdlms", NpdlmsParams{}, 0.11);
  return config;
}

}  // namespace diffnet::harness

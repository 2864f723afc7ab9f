#include <charconv>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "diffnet/harness.hpp"
#include "diffnet/noise.hpp"
#include "diffnet/theory.hpp"

namespace {

using namespace diffnet;

enum Exit { kOk = 0, kConfig = 1, kUnstable = 2, kIo = 3 };

std::string fmt(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, end);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0.0;
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    while (first != last && *first == ' ') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw Error(ErrorCode::kConfigError, "not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::kConfigError, "empty value list");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorCode::kIoError, "cannot write " + path);
}

std::size_t first_npdlms(const harness::ExperimentConfig& config) {
  for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
    if (config.algorithms[a].is_npdlms()) return a;
  }
  throw Error(ErrorCode::kConfigError, "config has no npdlms entry");
}

std::string theory_csv(const harness::ExperimentConfig& config) {
  const auto moments = theory::build_moments(harness::theory_inputs(config, first_npdlms(config)));
  const auto steady = theory::steady_state_metrics(moments);
  const auto curves = theory::transient_curves(moments, config.iterations);
  std::string out = "n,msd_theory_db,emse_theory_db\n";
  for (std::size_t n = 0; n < curves.msd_curve.size(); ++n) {
    out += std::to_string(n) + "," + fmt(to_db(curves.msd_curve[n])) + "," + fmt(to_db(curves.emse_curve[n])) + "\n";
  }
  out += "steady_state," + fmt(to_db(steady.msd)) + "," + fmt(to_db(steady.emse)) + "\n";
  return out;
}

void print_summary(const harness::RunResult& result) {
  std::printf("%-12s %12s %12s %10s %9s\n", "algorithm", "steady_db", "final_db", "kappa", "diverged");
  for (const auto& a : result.algorithms) {
    std::printf("%-12s %12.3f %12.3f %10.1f %9zu\n", a.label.c_str(), a.steady_msd_db(), a.final_msd_db(),
                a.kappa, a.diverged_realizations.size());
  }
  std::printf("%zu realizations x %zu iterations in %.2f s\n", result.realizations, result.iterations,
              result.wall_seconds);
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kUnstableSystem: return kUnstable;
    case ErrorCode::kIoError: return kIo;
    default: return kConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion adaptive network simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realizations, iterations, threads;

  auto* simulate = app.add_subcommand("simulate", "Run every configured algorithm and write the MSD curves");
  simulate->add_option("--config", config_path)->required();
  simulate->add_option("--out", out_path)->required();
  simulate->add_option("--seed", seed);
  simulate->add_option("--realizations", realizations);
  simulate->add_option("--iterations", iterations);
  simulate->add_option("--threads", threads);

  auto* theory_cmd = app.add_subcommand("theory", "Mean-square theory for the first npdlms entry");
  theory_cmd->add_option("--config", config_path)->required();
  theory_cmd->add_option("--out", out_path)->required();

  auto* compare = app.add_subcommand("compare", "Run all algorithms and overlay the theory where it applies");
  compare->add_option("--config", config_path)->required();
  compare->add_option("--out", out_path, "Optional CSV of the simulated curves");
  compare->add_option("--threads", threads);

  std::string param, values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat the experiment over one npdlms parameter");
  sweep_cmd->add_option("--param", param)->required()->check(CLI::IsMember({"eta", "h", "delta", "sigma"}));
  sweep_cmd->add_option("--values", values)->required();
  sweep_cmd->add_option("--config", config_path)->required();
  sweep_cmd->add_option("--out", out_path, "CSV path, stdout when omitted");
  sweep_cmd->add_option("--threads", threads);

  std::string noise_spec, t_values = "0.1,0.5,1,2";
  std::size_t samples = 100000;
  std::uint64_t noise_seed = 1;
  auto* noise_cmd = app.add_subcommand("validate-noise", "Empirical vs closed-form characteristic function");
  noise_cmd->add_option("--spec", noise_spec, "alpha,beta,gamma,delta")->required();
  noise_cmd->add_option("--samples", samples)->required()->check(CLI::PositiveNumber);
  noise_cmd->add_option("--t", t_values, "Comma separated evaluation points");
  noise_cmd->add_option("--seed", noise_seed);
  noise_cmd->add_option("--out", out_path, "CSV path, stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*noise_cmd) {
      const auto p = parse_list(noise_spec);
      if (p.size() != 4) throw Error(ErrorCode::kConfigError, "--spec needs alpha,beta,gamma,delta");
      const AlphaStableNoise spec{p[0], p[1], p[2], p[3]};
      const NoiseSpec law = spec;
      validate(law);
      const auto ts = parse_list(t_values);
      std::vector<std::complex<double>> acc(ts.size());
      Rng rng(noise_seed);
      for (std::size_t i = 0; i < samples; ++i) {
        const double x = sample(law, rng);
        for (std::size_t j = 0; j < ts.size(); ++j) acc[j] += std::polar(1.0, ts[j] * x);
      }
      std::string out = "t,re_emp,im_emp,re_theory,im_theory\n";
      for (std::size_t j = 0; j < ts.size(); ++j) {
        const auto emp = acc[j] / static_cast<double>(samples);
        const auto ref = characteristic_function(spec, ts[j]);
        out += fmt(ts[j]) + "," + fmt(emp.real()) + "," + fmt(emp.imag()) + "," + fmt(ref.real()) + "," +
               fmt(ref.imag()) + "\n";
      }
      write_text(out_path, out);
      return kOk;
    }

    auto config = harness::load_config(config_path);
    if (threads) config.threads = *threads;

    if (*simulate) {
      if (seed) config.base_seed = *seed;
      if (realizations) config.realizations = *realizations;
      if (iterations) config.iterations = *iterations;
      config.output_csv = out_path;
      const auto result = harness::run_experiment(config);
      print_summary(result);
      return kOk;
    }
    if (*theory_cmd) {
      write_text(out_path, theory_csv(config));
      return kOk;
    }
    if (*compare) {
      if (!out_path.empty()) config.output_csv = out_path;
      const auto result = harness::run_experiment(config);
      print_summary(result);
      for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
        if (!config.algorithms[a].is_npdlms() || config.algorithms[a].strategy != Strategy::kCta) continue;
        try {
          const auto moments = theory::build_moments(harness::theory_inputs(config, a));
          const auto steady = theory::steady_state_metrics(moments);
          const auto& sim = result.algorithms[a];
          std::printf("%-12s theory steady %.3f dB, simulated %.3f dB, gap %+.3f dB\n", sim.label.c_str(),
                      to_db(steady.msd), sim.steady_msd_db(), to_db(steady.msd) - sim.steady_msd_db());
        } catch (const Error& e) {
          std::printf("%-12s no theory overlay: %s\n", config.algorithms[a].label.c_str(), e.what());
        }
      }
      return kOk;
    }
    if (*sweep_cmd) {
      const auto vals = parse_list(values);
      const auto results = harness::sweep(config, harness::parse_sweep_parameter(param), vals);
      for (std::size_t i = 0; i < results.size(); ++i) {
        for (const auto& a : results[i].algorithms) {
          std::fprintf(stderr, "%s=%s %s steady %.3f dB kappa %.1f\n", param.c_str(), fmt(vals[i]).c_str(),
                       a.label.c_str(), a.steady_msd_db(), a.kappa);
        }
      }
      write_text(out_path, harness::sweep_csv(results, vals));
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "diffnet: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "diffnet: " << e.what() << "\n";
    return kConfig;
  }
  return kOk;
}

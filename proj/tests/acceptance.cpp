#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "diffnet/harness.hpp"
#include "oracles.hpp"

using namespace diffnet;
namespace th = diffnet::theory;
namespace hn = diffnet::harness;

namespace {

const std::filesystem::path kData = DIFFNET_DATA_DIR;
const std::filesystem::path kConfigs = DIFFNET_CONFIG_DIR;

constexpr double kGradientTol = 1e-6;
constexpr double kTheoryGapDb = 3.0;
constexpr double kOrderingMarginDb = 1.0;
constexpr double kNpdlmsDropDb = 10.0;
constexpr double kSimilarDb = 3.0;
constexpr double kGateDegradationDb = 1.0;
constexpr double kCfTol = 0.01;
constexpr double kVarianceTol = 0.05;
constexpr double kInvariantTol = 1e-12;
constexpr double kLimitDb = 0.1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

hn::ExperimentConfig scenario(const std::string& name, std::size_t realizations) {
  auto c = hn::load_config(kConfigs / name);
  c.realizations = realizations;
  c.output_csv.reset();
  c.threads = 0;
  return c;
}

Outcome gradient_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) worst = std::max(worst, oracle::gradient_relative_error(oracle::random_instance(rng)));
  return {worst <= kGradientTol, "max relative error " + fmt("%.3g", worst)};
}

Outcome stability_bound() {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> nodes(1, 4), dims(1, 3);
  std::uniform_real_distribution<double> var(0.5, 1.5);
  int ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = nodes(rng), d = dims(rng);
    auto topology = random_connected_topology(n, rng(), 0.6);
    auto weights = combination_weights(topology, CombinationRule::kMetropolis);
    std::vector<Matrix> r;
    for (std::size_t k = 0; k < n; ++k) {
      const Matrix a = oracle::random_vector(d * d, rng, 0.3).reshaped(d, d);
      r.push_back(var(rng) * Matrix::Identity(d, d) + a * a.transpose());
    }
    auto in = th::make_inputs(std::move(topology), std::move(weights), std::move(r), std::vector<double>(n, 0.01),
                              std::vector<double>(n, 0.01), KernelParams{1.0, 1.0, 0.25}, 3, normalized_ones(d));
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) bound = std::min(bound, th::stepsize_upper_bound(in, k));
    for (auto& s : in.steps) s = 0.9 * bound;
    const double below = oracle::dense_spectral_radius(th::build_moments(in).transition);
    for (auto& s : in.steps) s = 1.5 * bound;
    const double above = oracle::dense_spectral_radius(th::build_moments(in).transition);
    if (below < 1.0 && above > 1.0) ++ok;
  }
  return {ok == 20, std::to_string(ok) + "/20 networks bracket the bound"};
}

Outcome theory_vs_simulation() {
  auto c = scenario("theory_small.json", 500);
  const auto moments = th::build_moments(hn::theory_inputs(c, 0));
  const auto steady = th::steady_state_metrics(moments);
  const auto curve = th::transient_curves(moments, c.iterations);
  const auto sim = hn::run_experiment(c).algorithms[0];
  const double steady_gap = std::abs(sim.steady_msd_db() - to_db(steady.msd));
  double transient_gap = 0.0;
  for (std::size_t n = 21; n <= c.iterations; ++n) {
    transient_gap = std::max(transient_gap, std::abs(sim.msd_db(n) - to_db(curve.msd_curve[n])));
  }
  return {steady_gap <= kTheoryGapDb && transient_gap <= kTheoryGapDb,
          "theory " + fmt("%.2f", to_db(steady.msd)) + " dB, simulation " + fmt("%.2f", sim.steady_msd_db()) +
              " dB, steady gap " + fmt("%.2f", steady_gap) + " dB, max transient gap " + fmt("%.2f", transient_gap) +
              " dB"};
}

std::string summary(const hn::RunResult& r) {
  std::string s;
  for (const auto& a : r.algorithms) {
    s += a.label + " " + fmt("%.2f", a.steady_msd_db());
    if (!a.diverged_realizations.empty()) s += " (" + std::to_string(a.diverged_realizations.size()) + " diverged)";
    s += ", ";
  }
  return s.substr(0, s.size() - 2);
}

Outcome gaussian_ordering() {
  const auto r = hn::run_experiment(scenario("stationary_gaussian_30db.json", 200));
  bool pass = true;
  for (const char* label : {"npdlms", "dlms", "dlms_f", "dllad"}) {
    const double v = r.get(label).steady_msd_db();
    pass = pass && v <= r.get("dmcc").steady_msd_db() - kOrderingMarginDb &&
           v <= r.get("dse_lms").steady_msd_db() - kOrderingMarginDb;
  }
  return {pass, summary(r)};
}

Outcome alpha_stable_stationary() {
  const auto r = hn::run_experiment(scenario("stationary_alpha_stable.json", 200));
  const double initial_db = 0.0;
  auto broke = [&](const char* label) {
    const auto& a = r.get(label);
    return !a.diverged_realizations.empty() || a.steady_msd_db() > initial_db;
  };
  const double np = r.get("npdlms").steady_msd_db();
  const bool pass = broke("dlms") && broke("dlms_f") && np <= initial_db - kNpdlmsDropDb &&
                    np <= r.get("dmcc").steady_msd_db();
  return {pass, summary(r)};
}

Outcome alpha_stable_tracking() {
  const auto r = hn::run_experiment(scenario("nonstationary_alpha_stable.json", 200));
  const double np = r.get("npdlms").steady_msd_db();
  const double dse = r.get("dse_lms").steady_msd_db();
  const double lad = r.get("dllad").steady_msd_db();
  const double mcc = r.get("dmcc").steady_msd_db();
  const bool pass = std::abs(np - dse) <= kSimilarDb && std::abs(np - lad) <= kSimilarDb && np < mcc && dse < mcc &&
                    lad < mcc;
  return {pass, summary(r)};
}

Outcome threshold_sweep() {
  auto c = scenario("threshold_sweep.json", 50);
  const std::vector<double> etas{0, 5, 10, 15, 20, 22.5, 25, 30, 40};
  const auto runs = hn::sweep(c, hn::SweepParameter::kEta, etas);
  bool monotone = true;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    monotone = monotone && runs[i].algorithms[0].kappa <= runs[i - 1].algorithms[0].kappa;
  }
  const double half = static_cast<double>(c.iterations) / 2.0;
  std::size_t pick = 1;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (std::abs(runs[i].algorithms[0].kappa - half) < std::abs(runs[pick].algorithms[0].kappa - half)) pick = i;
  }
  const double degradation = runs[pick].algorithms[0].steady_msd_db() - runs[0].algorithms[0].steady_msd_db();
  return {monotone && degradation <= kGateDegradationDb,
          std::string(monotone ? "kappa monotone" : "kappa NOT monotone") + ", eta " + fmt("%g", etas[pick]) +
              " kappa " + fmt("%.1f", runs[pick].algorithms[0].kappa) + ", degradation " +
              fmt("%.2f", degradation) + " dB"};
}

Outcome alpha_stable_sampler() {
  const std::vector<AlphaStableNoise> specs{{1.2, 0, 1, 0}, {1.5, 0.5, 1, 0}, {0.8, -0.3, 0.7, 0.2}, {1.0, 0.5, 1, 0}};
  const std::vector<double> ts{0.1, 0.5, 1.0, 2.0};
  const std::size_t m = 1000000;
  double sup = 0.0;
  for (const auto& s : specs) {
    Rng rng(17);
    std::vector<std::complex<double>> acc(ts.size());
    for (std::size_t i = 0; i < m; ++i) {
      const double x = sample(s, rng);
      for (std::size_t j = 0; j < ts.size(); ++j) acc[j] += std::polar(1.0, ts[j] * x);
    }
    for (std::size_t j = 0; j < ts.size(); ++j) {
      sup = std::max(sup, std::abs(acc[j] / static_cast<double>(m) -
                                   oracle::stable_cf(s.alpha, s.beta, s.gamma, s.delta, ts[j])));
    }
  }
  const double gamma = 1.0;
  Rng rng(3);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = sample(AlphaStableNoise{2.0, 0.0, gamma, 0.0}, rng);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / static_cast<double>(m);
  const double var = sq / static_cast<double>(m) - mean * mean;
  const double target = 2.0 * gamma * gamma;
  return {sup <= kCfTol && std::abs(var - target) <= kVarianceTol * target,
          "sup CF error " + fmt("%.4f", sup) + ", alpha=2 variance " + fmt("%.4f", var)};
}

Outcome invariants() {
  std::mt19937_64 rng(9);
  double mu_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto g = oracle::random_instance(rng);
    if (g.neighbors.empty()) continue;
    const auto mu = mu_weights(g.own, g.neighbors[0], g.theta, g.neighbor_estimates[0], g.params.sigma,
                               g.params.sigma);
    double a = 0.0, b = 0.0;
    for (double v : mu.joint) a += v;
    for (double v : mu.own) b += v;
    mu_err = std::max({mu_err, std::abs(a - 1.0), std::abs(b - 1.0)});
  }

  double column_err = 0.0;
  std::vector<Topology> graphs{read_topology(kData / "topology16.txt")};
  for (std::uint64_t s = 1; s <= 10; ++s) graphs.push_back(random_connected_topology(12, s));
  for (const auto& t : graphs) {
    for (auto rule : {CombinationRule::kUniform, CombinationRule::kMetropolis}) {
      const Matrix a = combination_weights(t, rule).matrix();
      column_err = std::max(column_err, (a.colwise().sum().array() - 1.0).abs().maxCoeff());
      if (a.minCoeff() < 0.0) column_err = 1.0;
    }
  }

  bool bounded = true;
  for (double delta : {0.1, 0.25, 1.0}) {
    for (double a : {0.0, 1e-8, 0.3, 5.0, 1e6, 1e150, 1e300, std::numeric_limits<double>::max()}) {
      bounded = bounded && std::abs(pseudo_huber(delta, a).derivative) <= delta &&
                std::abs(pseudo_huber(delta, -a).derivative) <= delta;
    }
  }

  double ideal_err = 0.0;
  const Vector tk = normalized_ones(3), tl = -normalized_ones(3);
  const Vector far = tl + Vector::Constant(3, 100.0);
  for (std::size_t b = 1; b <= 5; ++b) {
    for (std::size_t r = 1; r <= b; ++r) {
      EstimateBuffer own(b), nb(b);
      for (std::size_t i = 0; i < b; ++i) {
        own.push(tk);
        nb.push(i < r ? tl : far);
      }
      const auto mu = mu_weights(own, nb, tk, tl, 1.0, 1.0);
      for (std::size_t i = 0; i < b; ++i) {
        ideal_err = std::max(ideal_err, std::abs(mu.own[i] - 1.0 / static_cast<double>(b)));
        // The ring stores newest first, so the r matching pushes sit at the tail.
        const double expected = i >= b - r ? 1.0 / static_cast<double>(r) : 0.0;
        ideal_err = std::max(ideal_err, std::abs(mu.joint[i] - expected));
      }
    }
  }

  auto c = scenario("theory_small.json", 8);
  c.iterations = 100;
  c.threads = 1;
  const bool deterministic = hn::to_csv(hn::run_experiment(c)) == hn::to_csv(hn::run_experiment(c));

  const bool pass = mu_err <= kInvariantTol && column_err <= kInvariantTol && bounded &&
                    ideal_err <= kInvariantTol && deterministic;
  return {pass, "mu " + fmt("%.2g", mu_err) + ", columns " + fmt("%.2g", column_err) + ", likelihood bounded " +
                    (bounded ? "yes" : "no") + ", idealized " + fmt("%.2g", ideal_err) + ", bit-identical " +
                    (deterministic ? "yes" : "no")};
}

Outcome transient_limit() {
  double worst = 0.0;
  auto check = [&](const th::MomentSet& m) {
    const double rho = oracle::dense_spectral_radius(m.transition);
    const auto n = static_cast<std::size_t>(std::ceil(std::log(1e-6) / std::log(rho))) + 1;
    const auto curve = th::transient_curves(m, n);
    const auto steady = th::steady_state_metrics(m);
    worst = std::max({worst, std::abs(to_db(curve.msd_curve.back()) - to_db(steady.msd)),
                      std::abs(to_db(curve.emse_curve.back()) - to_db(steady.emse))});
  };
  check(th::build_moments(hn::theory_inputs(scenario("theory_small.json", 1), 0)));
  auto big = scenario("stationary_gaussian_30db.json", 1);
  std::size_t np = 0;
  while (!big.algorithms[np].is_npdlms()) ++np;
  big.algorithms[np].step = 0.01;
  check(th::build_moments(hn::theory_inputs(big, np)));
  return {worst <= kLimitDb, "max gap " + fmt("%.2g", worst) + " dB"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient oracle", 10, gradient_oracle},
      {2, "stability bound bidirectionality", 5, stability_bound},
      {3, "theory vs simulation", 120, theory_vs_simulation},
      {4, "stationary Gaussian ordering", 600, gaussian_ordering},
      {5, "stationary alpha-stable", 600, alpha_stable_stationary},
      {6, "non-stationary alpha-stable", 900, alpha_stable_tracking},
      {7, "threshold sweep", 600, threshold_sweep},
      {8, "alpha-stable sampler", 30, alpha_stable_sampler},
      {9, "invariant suites", 30, invariants},
      {10, "transient/steady-state consistency", 30, transient_limit},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %d %s: %s (%s; %.1f s of %.0f s)\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

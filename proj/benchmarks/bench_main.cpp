#include <benchmark/benchmark.h>

#include "diffnet/algorithms.hpp"
#include "diffnet/npdlms.hpp"
#include "diffnet/theory.hpp"

using namespace diffnet;

namespace {

struct Network {
  Topology topology = random_connected_topology(16, 2024);
  CombinationMatrix weights = combination_weights(topology, CombinationRule::kUniform);
  std::vector<NodeProfile> profiles;
  Vector theta_o = normalized_ones(5);

  Network() {
    for (std::size_t k = 0; k < 16; ++k) profiles.emplace_back(Matrix::Identity(5, 5), AlphaStableNoise{1.2, 0, 1, 0});
  }

  std::vector<Measurement> draw(Rng& rng) const {
    std::vector<Measurement> out;
    for (const auto& p : profiles) out.push_back(generate_measurement(p, theta_o, rng));
    return out;
  }
};

void BM_NpdlmsIterate(benchmark::State& state) {
  const Network net;
  NpdlmsParams params;
  params.buffer_length = static_cast<std::size_t>(state.range(0));
  NpdlmsFilter filter(net.topology, net.weights, 5, params, std::vector<double>(16, 0.06));
  Rng rng(1);
  for (auto _ : state) {
    state.PauseTiming();
    const auto data = net.draw(rng);
    state.ResumeTiming();
    filter.iterate(data);
    benchmark::DoNotOptimize(filter.estimates());
  }
}
BENCHMARK(BM_NpdlmsIterate)->Arg(1)->Arg(3)->Arg(8);

void BM_DlmsIterate(benchmark::State& state) {
  const Network net;
  BaselineFilter filter(net.topology, net.weights, 5, Dlms{}, std::vector<double>(16, 0.05));
  Rng rng(1);
  for (auto _ : state) {
    state.PauseTiming();
    const auto data = net.draw(rng);
    state.ResumeTiming();
    filter.iterate(data);
    benchmark::DoNotOptimize(filter.estimates());
  }
}
BENCHMARK(BM_DlmsIterate);

void BM_AlphaStableSample(benchmark::State& state) {
  Rng rng(3);
  const NoiseSpec spec = AlphaStableNoise{1.2, 0.3, 1, 0};
  for (auto _ : state) benchmark::DoNotOptimize(sample(spec, rng));
}
BENCHMARK(BM_AlphaStableSample);

void BM_SteadyState(benchmark::State& state) {
  const Network net;
  std::vector<Matrix> r(16, Matrix::Identity(5, 5));
  const auto inputs = theory::make_inputs(net.topology, net.weights, r, std::vector<double>(16, 1e-3),
                                          std::vector<double>(16, 0.01), KernelParams{}, 3, net.theta_o);
  const auto moments = theory::build_moments(inputs);
  for (auto _ : state) benchmark::DoNotOptimize(theory::steady_state_metrics(moments));
}
BENCHMARK(BM_SteadyState)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <doctest.h>

#include <cmath>
#include <random>

#include "diffnet/theory.hpp"
#include "oracles.hpp"

using namespace diffnet;
using namespace diffnet::theory;

namespace {

TheoryInputs ring_inputs(std::size_t n, std::size_t d, double step, double delta, double noise,
                         std::uint64_t seed = 1) {
  std::vector<Edge> edges;
  for (std::size_t k = 1; k < n; ++k) edges.emplace_back(k, k + 1);
  if (n > 2) edges.emplace_back(n, 1);
  auto topology = Topology::build(n, edges);
  auto weights = combination_weights(topology, CombinationRule::kUniform);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.8, 1.2);
  std::vector<Matrix> r;
  for (std::size_t k = 0; k < n; ++k) r.push_back(u(rng) * Matrix::Identity(d, d));
  KernelParams kp;
  kp.delta = delta;
  return make_inputs(std::move(topology), std::move(weights), std::move(r), std::vector<double>(n, noise),
                     std::vector<double>(n, step), kp, 3, normalized_ones(d));
}

TheoryInputs single_node(double step, double delta, double r, double noise, std::size_t d = 1) {
  auto topology = Topology::build(1, {});
  auto weights = combination_weights(topology, CombinationRule::kUniform);
  KernelParams kp;
  kp.delta = delta;
  return make_inputs(std::move(topology), std::move(weights), {r * Matrix::Identity(d, d)}, {noise}, {step}, kp, 3,
                     normalized_ones(d));
}

TheoryInputs random_small(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> nodes(1, 4), dims(1, 3);
  std::uniform_real_distribution<double> var(0.5, 1.5);
  const std::size_t n = nodes(rng), d = dims(rng);
  auto topology = random_connected_topology(n, rng(), 0.6);
  auto weights = combination_weights(topology, CombinationRule::kMetropolis);
  std::vector<Matrix> r;
  for (std::size_t k = 0; k < n; ++k) {
    const Matrix a = oracle::random_vector(d * d, rng, 0.3).reshaped(d, d);
    r.push_back(var(rng) * Matrix::Identity(d, d) + a * a.transpose());
  }
  return make_inputs(std::move(topology), std::move(weights), std::move(r), std::vector<double>(n, 0.01),
                     std::vector<double>(n, 0.01), KernelParams{}, 3, normalized_ones(d));
}

double min_bound(const TheoryInputs& in) {
  double b = 1e300;
  for (std::size_t k = 0; k < in.nodes(); ++k) b = std::min(b, stepsize_upper_bound(in, k));
  return b;
}

}  // namespace

TEST_CASE("single-node moments") {
  const auto m = build_moments(single_node(0.01, 0.25, 1.0, 0.1, 3));
  CHECK((m.coefficient + 7.0 * Matrix::Identity(3, 3)).norm() < 1e-14);
  CHECK(m.prior.norm() == 0.0);
  CHECK((m.transition - (1.0 - 0.07) * Matrix::Identity(3, 3)).norm() < 1e-14);
}

TEST_CASE("prior bias follows the similarity count") {
  auto in = ring_inputs(3, 2, 0.01, 0.25, 0.01);
  CHECK(build_moments(in).prior.norm() == 0.0);
  in.similarity = {1, 2, 3};
  const auto m = build_moments(in);
  // Node 0 sees nodes 1 and 2: sum_i beta (B - r)/(B r) = 3 * (1/6 + 0).
  CHECK(m.prior(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m.prior(4, 4) == doctest::Approx(3.0 * (2.0 / 3.0 + 1.0 / 6.0)).epsilon(1e-14));
}

TEST_CASE("zero steps leave the pure combination") {
  auto in = ring_inputs(4, 2, 0.0, 0.25, 0.01);
  const auto m = build_moments(in);
  CHECK(spectral_radius(m.transition) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("step-size bound") {
  CHECK(stepsize_upper_bound(single_node(0.01, 0.25, 1.0, 0.1, 2), 0) == doctest::Approx(2.0 / 7.0).epsilon(1e-14));

  auto in = ring_inputs(4, 2, 0.01, 0.5, 0.01);
  Matrix sum = Matrix::Zero(2, 2);
  for (std::size_t l : in.topology.neighbors(0)) sum += in.regressor_covariance[l];
  CHECK(stepsize_upper_bound(in, 0) == doctest::Approx(2.0 / sum.eigenvalues().real().maxCoeff()).epsilon(1e-12));

  auto doubled = ring_inputs(4, 2, 0.01, 0.25, 0.01);
  const double base = stepsize_upper_bound(doubled, 1);
  for (auto& k : doubled.kernel) k.h *= 2.0;
  CHECK(stepsize_upper_bound(doubled, 1) == doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("delta validity window") {
  try {
    build_moments(ring_inputs(2, 2, 0.01, 0.75, 0.01));
    FAIL("expected DeltaOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDeltaOutOfRange);
  }
  CHECK_THROWS_AS(stepsize_upper_bound(ring_inputs(2, 2, 0.01, 0.8, 0.01), 0), Error);
}

TEST_CASE("spectral radius") {
  CHECK(spectral_radius(Matrix::Identity(12, 12)) == doctest::Approx(1.0).epsilon(1e-10));
  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = 0.5;
  diag(1, 1) = -0.9;
  CHECK(spectral_radius(diag) == doctest::Approx(0.9).epsilon(1e-10));

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    const Matrix a = oracle::random_vector(80 * 80, rng, 1.0).reshaped(80, 80);
    const Matrix scaled = a * (0.95 / oracle::dense_spectral_radius(a));
    CHECK(std::abs(spectral_radius(scaled) - oracle::dense_spectral_radius(scaled)) < 1e-8);
  }
  // Rotation blocks: complex pairs of equal modulus.
  Matrix rot = Matrix::Zero(20, 20);
  for (int i = 0; i < 20; i += 2) {
    const double r = 0.5 + 0.02 * i, t = 0.3 * (i + 1);
    rot(i, i) = r * std::cos(t);
    rot(i, i + 1) = -r * std::sin(t);
    rot(i + 1, i) = r * std::sin(t);
    rot(i + 1, i + 1) = r * std::cos(t);
  }
  CHECK(spectral_radius(rot) == doctest::Approx(0.86).epsilon(1e-9));

  Matrix nil = Matrix::Zero(16, 16);
  for (int i = 0; i + 1 < 16; ++i) nil(i, i + 1) = 1.0;
  CHECK(spectral_radius(nil) == 0.0);
  CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), Error);
}

TEST_CASE("weighted transition is the Kronecker square") {
  const auto m = build_moments(ring_inputs(3, 2, 0.02, 0.25, 0.01));
  const Matrix ft = m.transition.transpose();
  CHECK((m.weighted_transition() - oracle::kron(ft, ft)).cwiseAbs().maxCoeff() <= 1e-12);

  std::mt19937_64 rng(3);
  const Matrix sigma = oracle::random_vector(36, rng, 1.0).reshaped(6, 6);
  CHECK(std::abs(m.xi().dot(sigma.reshaped()) - (m.driving * sigma).trace()) < 1e-14);
}

TEST_CASE("steady state") {
  SUBCASE("no driving term gives zero MSD") {
    const auto m = build_moments(ring_inputs(3, 2, 0.02, 0.25, 0.0));
    const auto s = steady_state_metrics(m);
    for (double v : s.node_msd) CHECK(v == 0.0);
  }
  SUBCASE("scalar closed form") {
    // delta = 0.5, h = 1 gives coefficient -1, i.e. plain LMS: alpha sigma^2 / (2 - alpha r).
    for (double alpha : {0.01, 0.1, 0.5}) {
      const double r = 1.3, s2 = 0.2;
      const auto s = steady_state_metrics(build_moments(single_node(alpha, 0.5, r, s2)));
      CHECK(std::abs(s.msd - alpha * s2 / (2.0 - alpha * r)) <= 1e-10);
    }
  }
  SUBCASE("symmetric pair") {
    auto topology = Topology::build(2, std::vector<Edge>{{1, 2}});
    auto weights = combination_weights(topology, CombinationRule::kUniform);
    const auto in = make_inputs(topology, weights, {Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, {0.1, 0.1},
                                {0.02, 0.02}, KernelParams{}, 3, normalized_ones(2));
    const auto s = steady_state_metrics(build_moments(in));
    CHECK(s.node_msd[0] == doctest::Approx(s.node_msd[1]).epsilon(1e-12));
  }
  SUBCASE("agrees with a dense vec solve and averages exactly") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const auto m = build_moments(random_small(rng));
      const auto s = steady_state_metrics(m);
      const auto dense = oracle::dense_steady_msd(m);
      double sum = 0.0;
      for (std::size_t k = 0; k < m.nodes; ++k) {
        CHECK(s.node_msd[k] == doctest::Approx(dense[k]).epsilon(1e-9));
        sum += s.node_msd[k];
      }
      CHECK(s.msd == sum / static_cast<double>(m.nodes));
    }
  }
  SUBCASE("unstable system") {
    try {
      steady_state_metrics(build_moments(single_node(0.5, 0.25, 1.0, 0.1)));
      FAIL("expected UnstableSystem");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnstableSystem);
    }
  }
}

TEST_CASE("stability bound is bidirectional") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_small(rng);
    const double bound = min_bound(in);
    for (auto& s : in.steps) s = 0.9 * bound;
    CHECK(spectral_radius(build_moments(in).transition) < 1.0);
    for (auto& s : in.steps) s = 1.5 * bound;
    CHECK(spectral_radius(build_moments(in).transition) > 1.0);
  }
}

TEST_CASE("transient curves") {
  const auto m = build_moments(ring_inputs(4, 5, 0.02, 0.25, 0.01));
  const auto c = transient_curves(m, 400, true);
  CHECK(c.msd_curve[0] == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t n = 0; n <= 400; n += 37) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 4; ++k) sum += c.node_msd_curve[k][n];
    CHECK(sum / 4.0 == doctest::Approx(c.msd_curve[n]).epsilon(1e-9));
  }

  const auto quiet = build_moments(ring_inputs(3, 2, 0.02, 0.25, 0.0));
  const auto q = transient_curves(quiet, 300);
  for (std::size_t n = 1; n <= 300 && q.msd_curve[n - 1] > 1e-12; ++n) CHECK(q.msd_curve[n] < q.msd_curve[n - 1]);
  CHECK(std::abs(q.msd_curve.back()) < 1e-12);

  const double rho = spectral_radius(m.transition);
  const auto n_conv = static_cast<std::size_t>(std::ceil(std::log(1e-6) / std::log(rho))) + 1;
  const auto long_run = transient_curves(m, n_conv);
  const auto steady = steady_state_metrics(m);
  CHECK(std::abs(to_db(long_run.msd_curve.back()) - to_db(steady.msd)) <= 0.1);
  CHECK(std::abs(to_db(long_run.emse_curve.back()) - to_db(steady.emse)) <= 0.1);
}

TEST_CASE("transient curve matches a Monte-Carlo linearized recursion") {
  // Simulate theta~_n = F theta~_{n-1} + M G_n with G_k = c_k sum_l u_l' v_l, the
  // model the recursion describes, and compare block-averaged MSD in dB.
  for (std::uint64_t seed : {1u, 2u}) {
    const auto in = ring_inputs(4, 2, 0.02, 0.25, 0.05, seed);
    const auto m = build_moments(in);
    const std::size_t n_max = 200, runs = 200, block = 10;
    const auto theory = transient_curves(m, n_max);
    std::mt19937_64 rng(seed * 101);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> msd(n_max + 1, 0.0);
    const double c = (2 * 0.0625 - 1) / (2 * 0.0625);
    for (std::size_t r = 0; r < runs; ++r) {
      Vector err = m.theta_o;
      msd[0] += err.squaredNorm() / 4.0 / runs;
      for (std::size_t n = 1; n <= n_max; ++n) {
        std::vector<Vector> uv(4);
        for (std::size_t l = 0; l < 4; ++l) {
          Vector u(2);
          for (auto& x : u) x = normal(rng);
          const Eigen::LLT<Matrix> chol(in.regressor_covariance[l]);
          uv[l] = chol.matrixL() * u * (std::sqrt(in.noise_variance[l]) * normal(rng));
        }
        Vector g = Vector::Zero(8);
        for (std::size_t k = 0; k < 4; ++k) {
          for (std::size_t l : in.topology.neighbors(k)) g.segment(2 * k, 2) += c * uv[l];
        }
        err = m.transition * err + m.step * g;
        msd[n] += err.squaredNorm() / 4.0 / runs;
      }
    }
    for (std::size_t start = 1; start + block <= n_max + 1; start += block) {
      double sim = 0.0, th = 0.0;
      for (std::size_t n = start; n < start + block; ++n) {
        sim += msd[n];
        th += theory.msd_curve[n];
      }
      CHECK(std::abs(to_db(sim) - to_db(th)) <= 0.5);
    }
  }
}

TEST_CASE("beta and similarity estimates") {
  const Vector frozen = normalized_ones(3);
  std::vector<std::vector<Vector>> trace(40, std::vector<Vector>(2, frozen));
  const auto est = estimate_beta_and_r(trace, 3, 1.0);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(est.similarity[k] == 3);
    for (const auto& b : est.beta[k]) CHECK((b - Vector::Ones(3)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(estimate_beta_and_r(std::vector<std::vector<Vector>>(29, std::vector<Vector>(2, frozen)), 3, 1.0),
                  Error);

  std::mt19937_64 rng(8);
  std::vector<std::vector<Vector>> moving;
  Vector walk = frozen;
  for (int t = 0; t < 100; ++t) {
    walk += oracle::random_vector(3, rng, 0.5);
    moving.push_back({walk});
  }
  const auto drift = estimate_beta_and_r(moving, 3, 0.05);
  CHECK(drift.similarity[0] <= 3);
  CHECK(drift.similarity[0] >= 1);
}

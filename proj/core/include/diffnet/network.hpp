#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "diffnet/noise.hpp"
#include "diffnet/types.hpp"

namespace diffnet {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected connected graph with an implicit self-loop at every node.
/// Nodes are 0-based internally; the file format and build() use 1-based ids.
class Topology {
 public:
  /// Edges are 1-based node pairs; duplicates and explicit self-loops are coalesced.
  static Topology build(std::size_t node_count, std::span<const Edge> edges);

  std::size_t size() const { return neighbors_.size(); }

  /// Sorted neighborhood N_k, always containing k.
  const std::vector<std::size_t>& neighbors(std::size_t k) const { return neighbors_.at(k); }
  std::size_t degree(std::size_t k) const { return neighbors_.at(k).size(); }
  bool adjacent(std::size_t l, std::size_t k) const;

  /// 1-based edge list with l < k, excluding self-loops.
  std::vector<Edge> edges() const;

 private:
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// Random geometric graph on the unit square, re-drawn until connected.
Topology random_connected_topology(std::size_t node_count, std::uint64_t seed, double radius = 0.35);

Topology read_topology(const std::filesystem::path& path);
void write_topology(const Topology& topology, const std::filesystem::path& path);

enum class CombinationRule { kUniform, kMetropolis };

/// Left-stochastic N x N matrix; entry (l, k) weighs node l's estimate at node k.
class CombinationMatrix {
 public:
  CombinationMatrix() = default;
  explicit CombinationMatrix(Matrix weights) : weights_(std::move(weights)) {}

  std::size_t size() const { return static_cast<std::size_t>(weights_.rows()); }
  double weight(std::size_t l, std::size_t k) const { return weights_(l, k); }
  const Matrix& matrix() const { return weights_; }

 private:
  Matrix weights_;
};

CombinationMatrix combination_weights(const Topology& topology, CombinationRule rule);

/// Row-major N x N CSV, 17 significant digits.
void write_combination_csv(const CombinationMatrix& weights, const std::filesystem::path& path);

/// Per-node regressor statistics and noise law. The Cholesky factor of the
/// covariance is cached so draws are a single triangular product.
class NodeProfile {
 public:
  NodeProfile(Matrix regressor_covariance, NoiseSpec noise);

  const Matrix& regressor_covariance() const { return covariance_; }
  const Matrix& regressor_factor() const { return factor_; }
  const NoiseSpec& noise() const { return noise_; }
  std::size_t dimension() const { return static_cast<std::size_t>(covariance_.rows()); }

 private:
  Matrix covariance_;
  Matrix factor_;
  NoiseSpec noise_;
};

struct Measurement {
  RowVector u;
  double d = 0.0;
  double v = 0.0;
};

/// sigma_v^2 = (theta_o' R_u theta_o) * 10^(-snr_db / 10).
double noise_variance_from_snr(double snr_db, const Matrix& regressor_covariance, const Vector& theta_o);

Measurement generate_measurement(const NodeProfile& profile, const Vector& theta_now, Rng& rng);

/// Builds d = u theta + v from an explicit regressor and noise value.
Measurement make_measurement(RowVector u, const Vector& theta_now, double v);

struct Stationary {};

/// Model M1: omega_n = 0.99 omega_{n-1} + q_n, q_n ~ N(0, q_variance I).
struct RandomWalk {
  static constexpr double kDecay = 0.99;
  double q_variance = 0.0;
};

using Drift = std::variant<Stationary, RandomWalk>;

class GroundTruth {
 public:
  GroundTruth(Vector theta_o, Drift drift);

  const Vector& theta_o() const { return theta_o_; }
  const Drift& drift() const { return drift_; }
  const Vector& state() const { return omega_; }
  bool stationary() const { return std::holds_alternative<Stationary>(drift_); }

  /// Advances the drift by one step and returns theta_{o,n}.
  Vector step(Rng& rng);

 private:
  Vector theta_o_;
  Drift drift_;
  Vector omega_;
};

inline Vector drift_step(GroundTruth& truth, Rng& rng) { return truth.step(rng); }

/// theta_o = 1_d / sqrt(d).
Vector normalized_ones(std::size_t dimension);

/// Per-node regressor variances drawn uniformly from [lo, hi].
std::vector<double> variance_profile(std::size_t node_count, std::uint64_t seed, double lo = 0.8,
                                     double hi = 1.2);

std::vector<double> read_variance_profile(const std::filesystem::path& path);

}  // namespace diffnet

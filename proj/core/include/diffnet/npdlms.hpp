#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "diffnet/algorithms.hpp"
#include "diffnet/types.hpp"

namespace diffnet {

/// sigma: prior bandwidth, h: likelihood bandwidth, delta: pseudo-Huber steepness.
struct KernelParams {
  double sigma = 1.0;
  double h = 1.0;
  double delta = 0.25;
};

void validate(const KernelParams& params);

enum class GateMode { kSmooth, kHard };

struct ThresholdParams {
  double eta = 0.0;
  double slope = 5.0;
  GateMode mode = GateMode::kSmooth;
};

void validate(const ThresholdParams& params);

/// Fixed-capacity history of parameter vectors, newest first.
class EstimateBuffer {
 public:
  explicit EstimateBuffer(std::size_t capacity);

  void push(Vector value);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }
  bool empty() const { return size_ == 0; }
  /// i = 0 is the most recent entry.
  const Vector& operator[](std::size_t i) const;

 private:
  std::vector<Vector> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Responsibilities of the buffered entries: joint (own and neighbor kernels)
/// and own-kernel only. Each sums to one.
struct MuWeights {
  std::vector<double> joint;
  std::vector<double> own;
};

/// K_t(x - y) = exp(-|x - y|^2 / 2t) / t.
double gaussian_kernel(double bandwidth, const Vector& x, const Vector& y);

struct PseudoHuber {
  double loss = 0.0;
  double derivative = 0.0;
};

/// delta^2 (sqrt(1 + (a/delta)^2) - 1) and its derivative a / sqrt(1 + (a/delta)^2).
PseudoHuber pseudo_huber(double delta, double a);

double kde_prior(const EstimateBuffer& buffer, const Vector& theta, double sigma);

/// Kernel estimate of f(theta_k | theta_l) from index-aligned buffers.
double conditional_kde(const EstimateBuffer& own, const EstimateBuffer& neighbor, const Vector& theta_k,
                       const Vector& theta_l, double sigma_k, double sigma_l);

MuWeights mu_weights(const EstimateBuffer& own, const EstimateBuffer& neighbor, const Vector& theta_k,
                     const Vector& theta_l, double sigma_k, double sigma_l);

/// Everything node k holds when it evaluates its local objective. The
/// neighbor spans are ordered like N_k without k; data covers all of N_k.
struct LocalView {
  const EstimateBuffer& own_buffer;
  std::span<const EstimateBuffer> neighbor_buffers;
  std::span<const Vector> neighbor_estimates;
  std::span<const Measurement> data;
  /// theta_{k,n-1} as shared with the neighborhood; enters only the constant
  /// log f(theta_l), l = k, term of the objective.
  const Vector& previous_self;
};

/// log J_k with the likelihood read as -L_delta(e) / h (additive constants dropped).
double log_local_objective(const Vector& theta_k, const LocalView& view, const KernelParams& params);

/// Ascent direction of log_local_objective at theta_eval. The prior term is
/// dropped while the buffers hold fewer than two entries, and per neighbor
/// when its kernel weights are degenerate.
Vector npdlms_gradient(const Vector& theta_eval, const LocalView& view, const KernelParams& params);

/// epsilon_k = sum over N_k of (d_l - u_l theta_k)^2.
double neighbor_error(const Vector& theta_k, std::span<const Measurement> data);

/// Smooth: 1 / (1 + exp(-2 s (epsilon - eta))). Hard: 1 if epsilon > eta else 0.
double threshold_gate(double epsilon, const ThresholdParams& params);

struct NpdlmsParams {
  KernelParams kernel;
  ThresholdParams gate;
  std::size_t buffer_length = 3;
  Strategy strategy = Strategy::kCta;
};

/// Node-owned memory: its own history plus one aligned ring per neighbor
/// in N_k \ {k}, sorted by node id.
struct NodeMemory {
  NodeMemory(std::size_t k, const Topology& topology, std::size_t capacity);

  std::size_t node;
  std::vector<std::size_t> neighbor_ids;
  EstimateBuffer own;
  std::vector<EstimateBuffer> neighbors;
};

struct NpdlmsStepResult {
  NodeState state;
  /// Whether epsilon_k exceeded eta, i.e. whether the hard gate fired.
  bool updated = false;
};

/// One NPDLMS step at node k. Pushes the received previous estimates into
/// the buffers, then: CTA returns theta = phi + step H g(phi) with phi the
/// combination; ATC returns phi = theta_{k,n-1} + step H g(theta_{k,n-1}) and
/// leaves the combination to the scheduler.
NpdlmsStepResult npdlms_step(std::size_t k, NodeMemory& memory, const SharedData& shared,
                             const NpdlmsParams& params, double step);

class NpdlmsFilter final : public DiffusionFilter {
 public:
  NpdlmsFilter(const Topology& topology, const CombinationMatrix& weights, std::size_t dimension,
               NpdlmsParams params, std::vector<double> steps);

  void iterate(std::span<const Measurement> data) override;
  std::string name() const override { return "NPDLMS"; }
  const NpdlmsParams& params() const { return params_; }
  const NodeMemory& memory(std::size_t k) const { return memory_.at(k); }

 private:
  NpdlmsParams params_;
  std::vector<double> steps_;
  std::vector<NodeMemory> memory_;
};

}  // namespace diffnet

#include "diffnet/npdlms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace diffnet {

namespace {

double log_kernel(double bandwidth, const Vector& x, const Vector& y) {
  return -std::log(bandwidth) - (x - y).squaredNorm() / (2.0 * bandwidth);
}

// log sum exp over the finite entries; -inf when every entry is -inf.
double log_sum_exp(std::span<const double> values) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : values) peak = std::max(peak, v);
  if (!std::isfinite(peak)) return peak;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - peak);
  return peak + std::log(sum);
}

void check_bandwidth(double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::kNonPositiveBandwidth, "kernel bandwidth must be > 0");
}

void check_aligned(const EstimateBuffer& own, const EstimateBuffer& neighbor) {
  if (own.empty() || neighbor.empty()) throw Error(ErrorCode::kEmptyBuffer, "buffer holds no estimates");
  if (own.size() != neighbor.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "own and neighbor buffers are not aligned");
  }
}

std::vector<double> own_log_kernels(const EstimateBuffer& own, const Vector& theta_k, double sigma_k) {
  std::vector<double> out(own.size());
  for (std::size_t i = 0; i < own.size(); ++i) out[i] = log_kernel(sigma_k, theta_k, own[i]);
  return out;
}

std::vector<double> neighbor_log_kernels(const EstimateBuffer& neighbor, const Vector& theta_l,
                                         double sigma_l) {
  std::vector<double> out(neighbor.size());
  for (std::size_t i = 0; i < neighbor.size(); ++i) out[i] = log_kernel(sigma_l, theta_l, neighbor[i]);
  return out;
}

// Normalized exp(values); nullopt when the normalizer is not finite.
std::optional<std::vector<double>> softmax(std::span<const double> values) {
  const double norm = log_sum_exp(values);
  if (!std::isfinite(norm)) return std::nullopt;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::exp(values[i] - norm);
  return out;
}

double log_kde(const EstimateBuffer& buffer, const Vector& theta, double sigma) {
  const auto logs = own_log_kernels(buffer, theta, sigma);
  return log_sum_exp(logs) - std::log(static_cast<double>(buffer.size()));
}

// log f(theta_k | theta_l); nullopt when the neighbor kernels all vanish.
std::optional<double> log_conditional(const EstimateBuffer& own, const EstimateBuffer& neighbor,
                                      const Vector& theta_k, const Vector& theta_l, double sigma_k,
                                      double sigma_l) {
  const auto a = own_log_kernels(own, theta_k, sigma_k);
  const auto b = neighbor_log_kernels(neighbor, theta_l, sigma_l);
  std::vector<double> joint(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) joint[i] = a[i] + b[i];
  const double den = log_sum_exp(b);
  if (!std::isfinite(den)) return std::nullopt;
  return log_sum_exp(joint) - den;
}

std::optional<MuWeights> try_mu_weights(const EstimateBuffer& own, const EstimateBuffer& neighbor,
                                        const Vector& theta_k, const Vector& theta_l, double sigma_k,
                                        double sigma_l) {
  const auto a = own_log_kernels(own, theta_k, sigma_k);
  const auto b = neighbor_log_kernels(neighbor, theta_l, sigma_l);
  std::vector<double> joint(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) joint[i] = a[i] + b[i];
  auto mu_joint = softmax(joint);
  auto mu_own = softmax(a);
  if (!mu_joint || !mu_own) return std::nullopt;
  return MuWeights{std::move(*mu_joint), std::move(*mu_own)};
}

bool warm(const LocalView& view) {
  if (view.own_buffer.size() < 2) return false;
  return std::all_of(view.neighbor_buffers.begin(), view.neighbor_buffers.end(),
                     [](const EstimateBuffer& b) { return b.size() >= 2; });
}

void check_view(const LocalView& view) {
  if (view.neighbor_buffers.size() != view.neighbor_estimates.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one buffer per neighbor estimate is required");
  }
  if (view.data.size() != view.neighbor_estimates.size() + 1) {
    throw Error(ErrorCode::kDimensionMismatch, "data must cover the whole neighborhood");
  }
}

}  // namespace

void validate(const KernelParams& params) {
  if (!(params.sigma > 0.0) || !(params.h > 0.0)) {
    throw Error(ErrorCode::kNonPositiveBandwidth, "sigma and h must be > 0");
  }
  if (!(params.delta > 0.0)) throw Error(ErrorCode::kInvalidParameters, "delta must be > 0");
}

void validate(const ThresholdParams& params) {
  if (!(params.eta >= 0.0)) throw Error(ErrorCode::kInvalidParameters, "eta must be >= 0");
  if (!(params.slope > 0.0)) throw Error(ErrorCode::kInvalidParameters, "gate slope must be > 0");
}

EstimateBuffer::EstimateBuffer(std::size_t capacity) : slots_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::kInvalidParameters, "buffer capacity must be positive");
}

void EstimateBuffer::push(Vector value) {
  head_ = (head_ + slots_.size() - 1) % slots_.size();
  slots_[head_] = std::move(value);
  size_ = std::min(size_ + 1, slots_.size());
}

const Vector& EstimateBuffer::operator[](std::size_t i) const {
  if (i >= size_) throw Error(ErrorCode::kIndexOutOfRange, "buffer index past the stored entries");
  return slots_[(head_ + i) % slots_.size()];
}

double gaussian_kernel(double bandwidth, const Vector& x, const Vector& y) {
  check_bandwidth(bandwidth);
  if (x.size() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "kernel arguments differ in length");
  return std::exp(-(x - y).squaredNorm() / (2.0 * bandwidth)) / bandwidth;
}

PseudoHuber pseudo_huber(double delta, double a) {
  const double ratio = a / delta;
  const double root = std::sqrt(1.0 + ratio * ratio);
  // delta^2 (root - 1) rewritten to avoid cancellation for small |a|.
  return {a * a / (root + 1.0), a / root};
}

double kde_prior(const EstimateBuffer& buffer, const Vector& theta, double sigma) {
  check_bandwidth(sigma);
  if (buffer.empty()) throw Error(ErrorCode::kEmptyBuffer, "prior needs at least one buffered estimate");
  double sum = 0.0;
  for (std::size_t i = 0; i < buffer.size(); ++i) sum += gaussian_kernel(sigma, theta, buffer[i]);
  return sum / static_cast<double>(buffer.size());
}

double conditional_kde(const EstimateBuffer& own, const EstimateBuffer& neighbor, const Vector& theta_k,
                       const Vector& theta_l, double sigma_k, double sigma_l) {
  check_bandwidth(sigma_k);
  check_bandwidth(sigma_l);
  check_aligned(own, neighbor);
  const auto value = log_conditional(own, neighbor, theta_k, theta_l, sigma_k, sigma_l);
  if (!value) throw Error(ErrorCode::kDegenerateDenominator, "neighbor kernel sum underflowed");
  return std::exp(*value);
}

MuWeights mu_weights(const EstimateBuffer& own, const EstimateBuffer& neighbor, const Vector& theta_k,
                     const Vector& theta_l, double sigma_k, double sigma_l) {
  check_bandwidth(sigma_k);
  check_bandwidth(sigma_l);
  check_aligned(own, neighbor);
  auto mu = try_mu_weights(own, neighbor, theta_k, theta_l, sigma_k, sigma_l);
  if (!mu) throw Error(ErrorCode::kDegenerateDenominator, "kernel weights underflowed");
  return std::move(*mu);
}

double log_local_objective(const Vector& theta_k, const LocalView& view, const KernelParams& params) {
  validate(params);
  check_view(view);
  double total = 0.0;
  for (const auto& m : view.data) {
    total -= pseudo_huber(params.delta, m.d - m.u.dot(theta_k)).loss / params.h;
  }
  if (!view.own_buffer.empty()) total += log_kde(view.own_buffer, view.previous_self, params.sigma);
  for (std::size_t j = 0; j < view.neighbor_buffers.size(); ++j) {
    if (!view.neighbor_buffers[j].empty()) {
      total += log_kde(view.neighbor_buffers[j], view.neighbor_estimates[j], params.sigma);
    }
  }
  if (!warm(view)) return total;
  const double log_prior = log_kde(view.own_buffer, theta_k, params.sigma);
  for (std::size_t j = 0; j < view.neighbor_buffers.size(); ++j) {
    const auto& buf = view.neighbor_buffers[j];
    check_aligned(view.own_buffer, buf);
    const auto cond = log_conditional(view.own_buffer, buf, theta_k, view.neighbor_estimates[j],
                                      params.sigma, params.sigma);
    if (!cond) throw Error(ErrorCode::kDegenerateDenominator, "neighbor kernel sum underflowed");
    total += *cond - log_prior;
  }
  return total;
}

Vector npdlms_gradient(const Vector& theta_eval, const LocalView& view, const KernelParams& params) {
  check_view(view);
  Vector g = Vector::Zero(theta_eval.size());
  for (const auto& m : view.data) {
    if (m.u.size() != theta_eval.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "regressor and estimate lengths differ");
    }
    const double e = m.d - m.u.dot(theta_eval);
    g.noalias() += (pseudo_huber(params.delta, e).derivative / params.h) * m.u.transpose();
  }
  if (view.neighbor_buffers.empty() || !warm(view)) return g;

  const EstimateBuffer& own = view.own_buffer;
  Vector prior = Vector::Zero(theta_eval.size());
  for (std::size_t j = 0; j < view.neighbor_buffers.size(); ++j) {
    check_aligned(own, view.neighbor_buffers[j]);
    const auto mu = try_mu_weights(own, view.neighbor_buffers[j], theta_eval, view.neighbor_estimates[j],
                                   params.sigma, params.sigma);
    if (!mu) continue;
    for (std::size_t i = 0; i < own.size(); ++i) {
      prior.noalias() += (mu->joint[i] - mu->own[i]) * own[i];
    }
  }
  g.noalias() += prior / params.sigma;
  return g;
}

double neighbor_error(const Vector& theta_k, std::span<const Measurement> data) {
  double sum = 0.0;
  for (const auto& m : data) {
    const double e = m.d - m.u.dot(theta_k);
    sum += e * e;
  }
  return sum;
}

double threshold_gate(double epsilon, const ThresholdParams& params) {
  if (params.mode == GateMode::kHard) return epsilon > params.eta ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(-2.0 * params.slope * (epsilon - params.eta)));
}

NodeMemory::NodeMemory(std::size_t k, const Topology& topology, std::size_t capacity)
    : node(k), own(capacity) {
  for (std::size_t l : topology.neighbors(k)) {
    if (l == k) continue;
    neighbor_ids.push_back(l);
    neighbors.emplace_back(capacity);
  }
}

NpdlmsStepResult npdlms_step(std::size_t k, NodeMemory& memory, const SharedData& shared,
                             const NpdlmsParams& params, double step) {
  const std::size_t self = shared.self_index(k);
  if (shared.nodes.size() != memory.neighbor_ids.size() + 1 || shared.estimates.size() != shared.nodes.size() ||
      shared.data.size() != shared.nodes.size() || shared.weights.size() != shared.nodes.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "shared data does not match the node's neighborhood");
  }

  std::vector<Vector> neighbor_estimates;
  neighbor_estimates.reserve(memory.neighbor_ids.size());
  memory.own.push(shared.estimates[self]);
  for (std::size_t i = 0, j = 0; i < shared.nodes.size(); ++i) {
    if (i == self) continue;
    if (shared.nodes[i] != memory.neighbor_ids[j]) {
      throw Error(ErrorCode::kDimensionMismatch, "shared neighbor order differs from the buffers");
    }
    memory.neighbors[j].push(shared.estimates[i]);
    neighbor_estimates.push_back(shared.estimates[i]);
    ++j;
  }

  NpdlmsStepResult result;
  const Vector theta_eval = params.strategy == Strategy::kCta
                                ? combine(shared.weights, shared.estimates)
                                : shared.estimates[self];
  const double epsilon = neighbor_error(theta_eval, shared.data);
  result.updated = epsilon > params.gate.eta;
  const double gate = threshold_gate(epsilon, params.gate);

  Vector adapted = theta_eval;
  if (gate != 0.0 && step != 0.0) {
    const LocalView view{memory.own, memory.neighbors, neighbor_estimates, shared.data,
                         shared.estimates[self]};
    adapted.noalias() += (step * gate) * npdlms_gradient(theta_eval, view, params.kernel);
  }
  if (params.strategy == Strategy::kCta) {
    result.state.phi = theta_eval;
    result.state.theta = std::move(adapted);
  } else {
    result.state.phi = adapted;
    result.state.theta = std::move(adapted);
  }
  return result;
}

NpdlmsFilter::NpdlmsFilter(const Topology& topology, const CombinationMatrix& weights, std::size_t dimension,
                           NpdlmsParams params, std::vector<double> steps)
    : DiffusionFilter(topology, weights, dimension), params_(params), steps_(std::move(steps)) {
  validate(params_.kernel);
  validate(params_.gate);
  if (steps_.size() != topology.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one step size per node is required");
  }
  memory_.reserve(topology.size());
  for (std::size_t k = 0; k < topology.size(); ++k) {
    memory_.emplace_back(k, topology, params_.buffer_length);
  }
}

void NpdlmsFilter::iterate(std::span<const Measurement> data) {
  if (data.size() != topology_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one measurement per node is required");
  }
  const std::size_t n = topology_.size();
  const std::vector<Vector> previous = estimates_;
  std::vector<Vector> next(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto result = npdlms_step(k, memory_[k], gather(k, previous, data), params_, steps_[k]);
    if (result.updated) ++updates_[k];
    next[k] = std::move(result.state.theta);
  }
  if (params_.strategy == Strategy::kCta) {
    estimates_ = std::move(next);
    return;
  }
  for (std::size_t k = 0; k < n; ++k) {
    Vector acc = Vector::Zero(next[k].size());
    for (std::size_t l : topology_.neighbors(k)) acc.noalias() += weights_.weight(l, k) * next[l];
    estimates_[k] = std::move(acc);
  }
}

}  // namespace diffnet

#include "diffnet/algorithms.hpp"

#include <algorithm>
#include <cmath>

namespace diffnet {

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_dimensions(const SharedData& shared) {
  const std::size_t m = shared.nodes.size();
  if (m == 0 || shared.weights.size() != m || shared.estimates.size() != m || shared.data.size() != m) {
    throw Error(ErrorCode::kDimensionMismatch, "shared data must hold one entry per neighbor");
  }
  const auto d = shared.estimates.front().size();
  for (std::size_t i = 0; i < m; ++i) {
    if (shared.estimates[i].size() != d || shared.data[i].u.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "estimate and regressor lengths differ");
    }
  }
}

}  // namespace

std::string name_of(const Baseline& kind) {
  return std::visit(Overloaded{
                        [](const Dlms&) { return std::string("DLMS"); },
                        [](const DseLms&) { return std::string("DSE-LMS"); },
                        [](const Dmcc&) { return std::string("DMCC"); },
                        [](const DlmsF&) { return std::string("DLMS/F"); },
                        [](const Dllad&) { return std::string("DLLAD"); },
                    },
                    kind);
}

void validate(const Baseline& kind) {
  const double p = std::visit(Overloaded{
                                  [](const Dlms&) { return 1.0; },
                                  [](const DseLms&) { return 1.0; },
                                  [](const Dmcc& k) { return k.kernel_width; },
                                  [](const DlmsF& k) { return k.lambda; },
                                  [](const Dllad& k) { return k.alpha_p; },
                              },
                              kind);
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw Error(ErrorCode::kInvalidParameters, name_of(kind) + " hyperparameter must be > 0");
  }
}

double error_nonlinearity(const Baseline& kind, double e) {
  return std::visit(Overloaded{
                        [e](const Dlms&) { return e; },
                        [e](const DseLms&) { return sign(e); },
                        [e](const Dmcc& k) {
                          return std::exp(-e * e / (2.0 * k.kernel_width * k.kernel_width)) * e;
                        },
                        [e](const DlmsF& k) { return e * e * e / (k.lambda + e * e); },
                        [e](const Dllad& k) { return sign(e) / (1.0 + k.alpha_p * std::abs(e)); },
                    },
                    kind);
}

Vector baseline_update_direction(const Baseline& kind, double e, const RowVector& u) {
  return error_nonlinearity(kind, e) * u.transpose();
}

std::size_t SharedData::self_index(std::size_t k) const {
  const auto it = std::find(nodes.begin(), nodes.end(), k);
  if (it == nodes.end()) throw Error(ErrorCode::kIndexOutOfRange, "node missing from its own neighborhood");
  return static_cast<std::size_t>(it - nodes.begin());
}

Vector combine(std::span<const double> weights, std::span<const Vector> estimates) {
  if (weights.size() != estimates.size() || estimates.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "one weight per estimate is required");
  }
  Vector out = weights[0] * estimates[0];
  for (std::size_t i = 1; i < estimates.size(); ++i) {
    if (estimates[i].size() != out.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "estimate lengths differ");
    }
    out.noalias() += weights[i] * estimates[i];
  }
  return out;
}

Vector baseline_adapt(const Vector& theta_eval, std::span<const Measurement> data, const Baseline& kind,
                      double step) {
  Vector out = theta_eval;
  if (step == 0.0) return out;
  for (const auto& m : data) {
    const double e = m.d - m.u.dot(theta_eval);
    out.noalias() += (step * error_nonlinearity(kind, e)) * m.u.transpose();
  }
  return out;
}

NodeState cta_step(std::size_t k, const SharedData& shared, const Baseline& kind, double step) {
  check_dimensions(shared);
  shared.self_index(k);
  NodeState next;
  next.phi = combine(shared.weights, shared.estimates);
  next.theta = baseline_adapt(next.phi, shared.data, kind, step);
  return next;
}

Vector atc_adapt(std::size_t k, const SharedData& shared, const Baseline& kind, double step) {
  check_dimensions(shared);
  return baseline_adapt(shared.estimates[shared.self_index(k)], shared.data, kind, step);
}

DiffusionFilter::DiffusionFilter(const Topology& topology, const CombinationMatrix& weights,
                                 std::size_t dimension)
    : topology_(topology),
      weights_(weights),
      estimates_(topology.size(), Vector::Zero(static_cast<Eigen::Index>(dimension))),
      updates_(topology.size(), 0) {
  if (weights.size() != topology.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "combination matrix does not match the topology");
  }
}

SharedData DiffusionFilter::gather(std::size_t k, std::span<const Vector> estimates,
                                   std::span<const Measurement> data) const {
  const auto& nk = topology_.neighbors(k);
  SharedData shared;
  shared.nodes = nk;
  shared.weights.reserve(nk.size());
  shared.estimates.reserve(nk.size());
  shared.data.reserve(nk.size());
  for (std::size_t l : nk) {
    shared.weights.push_back(weights_.weight(l, k));
    shared.estimates.push_back(estimates[l]);
    shared.data.push_back(data[l]);
  }
  return shared;
}

BaselineFilter::BaselineFilter(const Topology& topology, const CombinationMatrix& weights,
                               std::size_t dimension, Baseline kind, std::vector<double> steps,
                               Strategy strategy)
    : DiffusionFilter(topology, weights, dimension),
      kind_(kind),
      steps_(std::move(steps)),
      strategy_(strategy) {
  validate(kind_);
  if (steps_.size() != topology.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one step size per node is required");
  }
}

void BaselineFilter::iterate(std::span<const Measurement> data) {
  if (data.size() != topology_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one measurement per node is required");
  }
  const std::size_t n = topology_.size();
  const std::vector<Vector> previous = estimates_;
  if (strategy_ == Strategy::kCta) {
    for (std::size_t k = 0; k < n; ++k) {
      estimates_[k] = cta_step(k, gather(k, previous, data), kind_, steps_[k]).theta;
      if (steps_[k] != 0.0) ++updates_[k];
    }
    return;
  }
  std::vector<Vector> phi(n);
  for (std::size_t k = 0; k < n; ++k) {
    phi[k] = atc_adapt(k, gather(k, previous, data), kind_, steps_[k]);
    if (steps_[k] != 0.0) ++updates_[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& nk = topology_.neighbors(k);
    Vector acc = Vector::Zero(phi[k].size());
    for (std::size_t l : nk) acc.noalias() += weights_.weight(l, k) * phi[l];
    estimates_[k] = std::move(acc);
  }
}

}  // namespace diffnet

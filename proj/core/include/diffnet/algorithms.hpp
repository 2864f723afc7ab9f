#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "diffnet/network.hpp"
#include "diffnet/types.hpp"

namespace diffnet {

enum class Strategy { kAtc, kCta };

struct Dlms {};
struct DseLms {};
struct Dmcc {
  double kernel_width = 2.0;
};
struct DlmsF {
  double lambda = 1.0;
};
struct Dllad {
  double alpha_p = 1.0;
};

using Baseline = std::variant<Dlms, DseLms, Dmcc, DlmsF, Dllad>;

std::string name_of(const Baseline& kind);

/// Throws Error(kInvalidParameters) unless every hyperparameter is > 0.
void validate(const Baseline& kind);

/// Scalar error nonlinearity g(e); g(0) = 0 for every kind.
///   DLMS e | DSE-LMS sign(e) | DMCC exp(-e^2 / 2 s^2) e | DLMS/F e^3 / (lambda + e^2)
///   DLLAD sign(e) / (1 + alpha_p |e|)
double error_nonlinearity(const Baseline& kind, double e);

/// g(e) u', the ascent direction contributed by one measurement.
Vector baseline_update_direction(const Baseline& kind, double e, const RowVector& u);

struct NodeState {
  Vector theta;
  Vector phi;
};

/// What node k holds from its neighborhood for one iteration: the combination
/// column restricted to N_k, the neighbors' estimates and their measurements.
struct SharedData {
  std::vector<std::size_t> nodes;
  std::vector<double> weights;
  std::vector<Vector> estimates;
  std::vector<Measurement> data;

  std::size_t self_index(std::size_t k) const;
};

/// Sum over N_k of a_{l,k} estimate_l.
Vector combine(std::span<const double> weights, std::span<const Vector> estimates);

/// theta_eval + step * sum_l g(d_l - u_l theta_eval) u_l'.
Vector baseline_adapt(const Vector& theta_eval, std::span<const Measurement> data, const Baseline& kind,
                      double step);

/// Combine the previous estimates, then adapt on the combined vector.
NodeState cta_step(std::size_t k, const SharedData& shared, const Baseline& kind, double step);

/// Adapt node k's previous estimate on its neighborhood data. The caller
/// finishes the ATC step with combine() once every phi of this iteration exists.
Vector atc_adapt(std::size_t k, const SharedData& shared, const Baseline& kind, double step);

/// A network of synchronous diffusion filters. iterate() reads a snapshot of
/// the previous estimates only, so node updates inside one call are independent.
class DiffusionFilter {
 public:
  virtual ~DiffusionFilter() = default;

  virtual void iterate(std::span<const Measurement> data) = 0;
  virtual std::string name() const = 0;

  const std::vector<Vector>& estimates() const { return estimates_; }
  /// Number of iterations in which node k applied its adaptation term.
  std::size_t update_count(std::size_t k) const { return updates_.at(k); }

 protected:
  DiffusionFilter(const Topology& topology, const CombinationMatrix& weights, std::size_t dimension);

  SharedData gather(std::size_t k, std::span<const Vector> estimates,
                    std::span<const Measurement> data) const;

  const Topology& topology_;
  const CombinationMatrix& weights_;
  std::vector<Vector> estimates_;
  std::vector<std::size_t> updates_;
};

class BaselineFilter final : public DiffusionFilter {
 public:
  BaselineFilter(const Topology& topology, const CombinationMatrix& weights, std::size_t dimension,
                 Baseline kind, std::vector<double> steps, Strategy strategy = Strategy::kCta);

  void iterate(std::span<const Measurement> data) override;
  std::string name() const override { return name_of(kind_); }

 private:
  Baseline kind_;
  std::vector<double> steps_;
  Strategy strategy_;
};

}  // namespace diffnet

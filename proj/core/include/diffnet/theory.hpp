#pragma once

#include <cstddef>
#include <vector>

#include "diffnet/network.hpp"
#include "diffnet/npdlms.hpp"
#include "diffnet/types.hpp"

namespace diffnet::theory {

/// Inputs of the linearized mean-square model of CTA NPDLMS.
struct TheoryInputs {
  Topology topology;
  CombinationMatrix weights;
  std::vector<Matrix> regressor_covariance;
  std::vector<double> noise_variance;
  std::vector<double> steps;
  std::vector<KernelParams> kernel;
  std::size_t buffer_length = 3;
  /// r_l in [1, B]: buffered entries of node l that match its current estimate.
  std::vector<std::size_t> similarity;
  /// beta[k][i], i < B: diagonal of the scaling matrix relating theta_{k,n-1-i} to theta_{k,n}.
  std::vector<std::vector<Vector>> beta;
  Vector theta_o;

  std::size_t nodes() const { return topology.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(theta_o.size()); }
};

/// Defaults for a network: r_l = B and beta = I (no prior bias).
TheoryInputs make_inputs(Topology topology, CombinationMatrix weights, std::vector<Matrix> regressor_covariance,
                         std::vector<double> noise_variance, std::vector<double> steps, KernelParams kernel,
                         std::size_t buffer_length, Vector theta_o);

/// Block matrices of the error recursion. All Nd x Nd.
struct MomentSet {
  std::size_t nodes = 0;
  std::size_t dimension = 0;
  Matrix step;        ///< M = diag(alpha_k I_d)
  Matrix coefficient; ///< R, block k = c_k sum_{l in N_k} R_{u,l}, c_k = (2 delta^2 - 1) / (2 delta^2 h_k)
  Matrix noise_cov;   ///< E[G G'], block (k,k') = c_k c_k' sum_{l in N_k cap N_k'} sigma_l^2 R_{u,l}
  Matrix prior;       ///< P, block k = (1/sigma_k) sum_{l in N_k\k} sum_i beta_{k,i} (B - r_l) / (B r_l)
  Matrix transition;  ///< F = (I + M R - M P) (A' kron I_d)
  Matrix driving;     ///< Xi = M (E[G G'] + P theta theta' P') M, so that xi sigma = Tr(Xi Sigma)
  Vector theta_o;     ///< stacked 1_N kron theta_o
  std::vector<Matrix> regressor_covariance;

  /// vec(Xi), the row (gamma + delta) acting on vec(Sigma).
  Vector xi() const;
  /// F' kron F', the (Nd)^2 x (Nd)^2 weighted-norm transition. Dense; small networks only.
  Matrix weighted_transition() const;
};

MomentSet build_moments(const TheoryInputs& inputs);

/// 2 / lambda_max(|c_k| sum R_{u,l} + P_k) for node k.
double stepsize_upper_bound(const TheoryInputs& inputs, std::size_t k);

struct SpectralOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
};

/// max |lambda| by block power (subspace) iteration with Rayleigh-Ritz
/// extraction, so complex pairs and +-lambda ties converge.
double spectral_radius(const Matrix& matrix, const SpectralOptions& options = {});

/// Linear-scale MSD/EMSE. Steady-state fields are filled by
/// steady_state_metrics, the curves by transient_curves.
struct PerformanceCurves {
  std::vector<double> node_msd;
  std::vector<double> node_emse;
  double msd = 0.0;
  double emse = 0.0;

  /// Index 0 is the zero-initialized state, index n follows n iterations.
  std::vector<double> msd_curve;
  std::vector<double> emse_curve;
  std::vector<std::vector<double>> node_msd_curve;
  std::vector<std::vector<double>> node_emse_curve;
};

PerformanceCurves steady_state_metrics(const MomentSet& moments);

/// Network curves come from carrying F^n sigma forward; with per_node set the
/// per-node curves are added from the equivalent covariance recursion.
PerformanceCurves transient_curves(const MomentSet& moments, std::size_t n_max, bool per_node = false);

/// Steady-state error covariance Y = F Y F' + Xi.
Matrix steady_state_covariance(const MomentSet& moments);

struct BetaEstimate {
  std::vector<std::vector<Vector>> beta;
  std::vector<std::size_t> similarity;
};

/// Empirical beta and r_l from a pilot trace indexed [iteration][node], already
/// past burn-in. sigma is the prior bandwidth used for the similarity test.
BetaEstimate estimate_beta_and_r(const std::vector<std::vector<Vector>>& trace, std::size_t buffer_length,
                                 double sigma);

}  // namespace diffnet::theory

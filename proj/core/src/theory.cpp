#include "diffnet/theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace diffnet::theory {

namespace {

const double kDeltaLimit = 1.0 / std::sqrt(2.0);

// (2 delta^2 - 1) / (2 delta^2 h), negative inside the validity window.
double maclaurin_coefficient(const KernelParams& p) {
  const double two_d2 = 2.0 * p.delta * p.delta;
  return (two_d2 - 1.0) / (two_d2 * p.h);
}

void check_inputs(const TheoryInputs& in) {
  const std::size_t n = in.nodes();
  const std::size_t d = in.dimension();
  if (d == 0) throw Error(ErrorCode::kDimensionMismatch, "theta_o is empty");
  if (in.weights.size() != n || in.regressor_covariance.size() != n || in.noise_variance.size() != n ||
      in.steps.size() != n || in.kernel.size() != n || in.similarity.size() != n || in.beta.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "per-node theory inputs must have one entry per node");
  }
  if (in.buffer_length == 0) throw Error(ErrorCode::kInvalidParameters, "buffer length must be positive");
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = in.regressor_covariance[k];
    if (r.rows() != static_cast<Eigen::Index>(d) || r.cols() != static_cast<Eigen::Index>(d)) {
      throw Error(ErrorCode::kDimensionMismatch, "regressor covariance size differs from theta_o");
    }
    const auto& kp = in.kernel[k];
    if (!(kp.delta > 0.0 && kp.delta < kDeltaLimit)) {
      std::ostringstream msg;
      msg << "delta must lie in (0, 1/sqrt(2)) for the linearized model, got " << kp.delta;
      throw Error(ErrorCode::kDeltaOutOfRange, msg.str());
    }
    if (!(kp.h > 0.0) || !(kp.sigma > 0.0)) {
      throw Error(ErrorCode::kNonPositiveBandwidth, "h and sigma must be > 0");
    }
    if (in.similarity[k] < 1 || in.similarity[k] > in.buffer_length) {
      throw Error(ErrorCode::kInvalidParameters, "similarity count r_l must lie in [1, B]");
    }
    if (in.beta[k].size() != in.buffer_length) {
      throw Error(ErrorCode::kDimensionMismatch, "beta needs one diagonal per buffer slot");
    }
    for (const auto& b : in.beta[k]) {
      if (b.size() != static_cast<Eigen::Index>(d)) {
        throw Error(ErrorCode::kDimensionMismatch, "beta diagonal length differs from theta_o");
      }
    }
  }
}

// d x d prior block for node k (diagonal).
Matrix prior_block(const TheoryInputs& in, std::size_t k) {
  const auto d = static_cast<Eigen::Index>(in.dimension());
  const double b = static_cast<double>(in.buffer_length);
  Vector diag = Vector::Zero(d);
  for (std::size_t l : in.topology.neighbors(k)) {
    if (l == k) continue;
    const double r = static_cast<double>(in.similarity[l]);
    const double weight = (b - r) / (b * r);
    for (const auto& beta : in.beta[k]) diag += weight * beta;
  }
  return (diag / in.kernel[k].sigma).asDiagonal();
}

Matrix neighborhood_covariance(const TheoryInputs& in, std::size_t k) {
  const auto d = static_cast<Eigen::Index>(in.dimension());
  Matrix sum = Matrix::Zero(d, d);
  for (std::size_t l : in.topology.neighbors(k)) sum += in.regressor_covariance[l];
  return sum;
}

// Tr(C Sigma_k) for the weighting with `block` at (k,k).
double block_trace(const Matrix& c, std::size_t k, std::size_t d, const Matrix& block) {
  const auto o = static_cast<Eigen::Index>(k * d);
  const auto dd = static_cast<Eigen::Index>(d);
  return (c.block(o, o, dd, dd).cwiseProduct(block)).sum();
}

Matrix node_weighting(const MomentSet& m, std::size_t k, const Matrix& block) {
  const auto nd = static_cast<Eigen::Index>(m.nodes * m.dimension);
  const auto dd = static_cast<Eigen::Index>(m.dimension);
  Matrix sigma = Matrix::Zero(nd, nd);
  sigma.block(static_cast<Eigen::Index>(k * m.dimension), static_cast<Eigen::Index>(k * m.dimension), dd, dd) =
      block;
  return sigma;
}

double weighted_norm(const Vector& x, const Matrix& sigma) { return x.dot(sigma * x); }

void require_stable(const MomentSet& m) {
  const double rho = spectral_radius(m.transition);
  if (!(rho < 1.0)) {
    std::ostringstream msg;
    msg << "spectral radius of the mean transition is " << rho;
    throw Error(ErrorCode::kUnstableSystem, msg.str());
  }
}

// One weighted transient curve: value_m = value_{m-1} - |theta|^2_{F^{m-1}(I-F)sigma} + xi F^{m-1} sigma.
std::vector<double> carried_curve(const MomentSet& m, const Matrix& sigma, std::size_t n_max) {
  std::vector<double> out;
  out.reserve(n_max + 1);
  Matrix carried = sigma;
  double value = weighted_norm(m.theta_o, carried);
  out.push_back(value);
  for (std::size_t step = 1; step <= n_max; ++step) {
    Matrix next = m.transition.transpose() * carried * m.transition;
    value += -(weighted_norm(m.theta_o, carried) - weighted_norm(m.theta_o, next)) +
             m.driving.cwiseProduct(carried).sum();
    out.push_back(value);
    carried = std::move(next);
  }
  return out;
}

}  // namespace

TheoryInputs make_inputs(Topology topology, CombinationMatrix weights, std::vector<Matrix> regressor_covariance,
                         std::vector<double> noise_variance, std::vector<double> steps, KernelParams kernel,
                         std::size_t buffer_length, Vector theta_o) {
  const std::size_t n = topology.size();
  const auto d = theta_o.size();
  TheoryInputs in{std::move(topology),
                  std::move(weights),
                  std::move(regressor_covariance),
                  std::move(noise_variance),
                  std::move(steps),
                  std::vector<KernelParams>(n, kernel),
                  buffer_length,
                  std::vector<std::size_t>(n, buffer_length),
                  std::vector<std::vector<Vector>>(n, std::vector<Vector>(buffer_length, Vector::Ones(d))),
                  std::move(theta_o)};
  return in;
}

Vector MomentSet::xi() const { return driving.reshaped(); }

Matrix MomentSet::weighted_transition() const {
  const Matrix ft = transition.transpose();
  const Eigen::Index s = ft.rows();
  Matrix out(s * s, s * s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) out.block(i * s, j * s, s, s) = ft(i, j) * ft;
  return out;
}

MomentSet build_moments(const TheoryInputs& in) {
  check_inputs(in);
  const std::size_t n = in.nodes();
  const std::size_t d = in.dimension();
  const auto dd = static_cast<Eigen::Index>(d);
  const auto nd = static_cast<Eigen::Index>(n * d);

  MomentSet m;
  m.nodes = n;
  m.dimension = d;
  m.regressor_covariance = in.regressor_covariance;
  m.step = Matrix::Zero(nd, nd);
  m.coefficient = Matrix::Zero(nd, nd);
  m.noise_cov = Matrix::Zero(nd, nd);
  m.prior = Matrix::Zero(nd, nd);
  m.theta_o = in.theta_o.replicate(static_cast<Eigen::Index>(n), 1);

  std::vector<double> c(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto o = static_cast<Eigen::Index>(k * d);
    c[k] = maclaurin_coefficient(in.kernel[k]);
    m.step.block(o, o, dd, dd) = in.steps[k] * Matrix::Identity(dd, dd);
    m.coefficient.block(o, o, dd, dd) = c[k] * neighborhood_covariance(in, k);
    m.prior.block(o, o, dd, dd) = prior_block(in, k);
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t kk = 0; kk < n; ++kk) {
      Matrix block = Matrix::Zero(dd, dd);
      for (std::size_t l : in.topology.neighbors(k)) {
        if (in.topology.adjacent(l, kk)) block += in.noise_variance[l] * in.regressor_covariance[l];
      }
      m.noise_cov.block(static_cast<Eigen::Index>(k * d), static_cast<Eigen::Index>(kk * d), dd, dd) =
          c[k] * c[kk] * block;
    }
  }

  Matrix combination = Matrix::Zero(nd, nd);
  const Matrix& a = in.weights.matrix();
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      if (a(l, k) == 0.0) continue;
      combination.block(static_cast<Eigen::Index>(k * d), static_cast<Eigen::Index>(l * d), dd, dd) =
          a(l, k) * Matrix::Identity(dd, dd);
    }
  }
  m.transition = (Matrix::Identity(nd, nd) + m.step * m.coefficient - m.step * m.prior) * combination;

  const Vector bias = m.prior * m.theta_o;
  m.driving = m.step * (m.noise_cov + bias * bias.transpose()) * m.step;
  if (!m.transition.allFinite() || !m.driving.allFinite()) {
    throw Error(ErrorCode::kInvalidParameters, "moment matrices are not finite");
  }
  return m;
}

double stepsize_upper_bound(const TheoryInputs& in, std::size_t k) {
  check_inputs(in);
  if (k >= in.nodes()) throw Error(ErrorCode::kIndexOutOfRange, "node index out of range");
  const Matrix x = -maclaurin_coefficient(in.kernel[k]) * neighborhood_covariance(in, k) + prior_block(in, k);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(x, Eigen::EigenvaluesOnly);
  const double lambda = solver.eigenvalues().maxCoeff();
  if (!(lambda > 0.0)) throw Error(ErrorCode::kInvalidParameters, "bound matrix is not positive definite");
  return 2.0 / lambda;
}

Matrix steady_state_covariance(const MomentSet& m) {
  require_stable(m);
  const double xi_norm = m.driving.norm();
  if (xi_norm == 0.0) return Matrix::Zero(m.driving.rows(), m.driving.cols());

  // Smith doubling: Y <- Y + A Y A', A <- A^2.
  Matrix y = m.driving;
  Matrix a = m.transition;
  for (int it = 0; it < 200; ++it) {
    const Matrix increment = a * y * a.transpose();
    y += increment;
    a = a * a;
    if (increment.norm() <= 1e-17 * y.norm() || a.norm() < 1e-300) break;
  }
  const double residual = (y - m.transition * y * m.transition.transpose() - m.driving).norm();
  if (residual <= 1e-10 * std::max(xi_norm, y.norm())) return y;

  const Eigen::Index s = m.transition.rows();
  if (s * s > 4096) throw Error(ErrorCode::kSingularSolve, "iterative Stein solve did not converge");
  const Matrix f = m.transition;
  Matrix lhs = Matrix::Identity(s * s, s * s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) lhs.block(i * s, j * s, s, s) -= f(i, j) * f;
  Eigen::FullPivLU<Matrix> lu(lhs);
  if (!lu.isInvertible()) throw Error(ErrorCode::kSingularSolve, "I - F kron F is singular");
  const Vector vec_y = lu.solve(m.xi());
  return vec_y.reshaped(s, s);
}

PerformanceCurves steady_state_metrics(const MomentSet& m) {
  const Matrix y = steady_state_covariance(m);
  PerformanceCurves out;
  out.node_msd.resize(m.nodes);
  out.node_emse.resize(m.nodes);
  const Matrix identity = Matrix::Identity(static_cast<Eigen::Index>(m.dimension),
                                           static_cast<Eigen::Index>(m.dimension));
  double msd_sum = 0.0;
  double emse_sum = 0.0;
  for (std::size_t k = 0; k < m.nodes; ++k) {
    out.node_msd[k] = block_trace(y, k, m.dimension, identity);
    out.node_emse[k] = block_trace(y, k, m.dimension, m.regressor_covariance[k]);
    msd_sum += out.node_msd[k];
    emse_sum += out.node_emse[k];
  }
  out.msd = msd_sum / static_cast<double>(m.nodes);
  out.emse = emse_sum / static_cast<double>(m.nodes);
  return out;
}

PerformanceCurves transient_curves(const MomentSet& m, std::size_t n_max, bool per_node) {
  require_stable(m);
  const auto nd = static_cast<Eigen::Index>(m.nodes * m.dimension);
  const double inv_n = 1.0 / static_cast<double>(m.nodes);

  Matrix sigma_msd = inv_n * Matrix::Identity(nd, nd);
  Matrix sigma_emse = Matrix::Zero(nd, nd);
  for (std::size_t k = 0; k < m.nodes; ++k) sigma_emse += inv_n * node_weighting(m, k, m.regressor_covariance[k]);

  PerformanceCurves out;
  out.msd_curve = carried_curve(m, sigma_msd, n_max);
  out.emse_curve = carried_curve(m, sigma_emse, n_max);
  if (!per_node) return out;

  out.node_msd_curve.assign(m.nodes, std::vector<double>(n_max + 1));
  out.node_emse_curve.assign(m.nodes, std::vector<double>(n_max + 1));
  const Matrix identity = Matrix::Identity(static_cast<Eigen::Index>(m.dimension),
                                           static_cast<Eigen::Index>(m.dimension));
  Matrix cov = m.theta_o * m.theta_o.transpose();
  for (std::size_t step = 0; step <= n_max; ++step) {
    if (step > 0) cov = m.transition * cov * m.transition.transpose() + m.driving;
    for (std::size_t k = 0; k < m.nodes; ++k) {
      out.node_msd_curve[k][step] = block_trace(cov, k, m.dimension, identity);
      out.node_emse_curve[k][step] = block_trace(cov, k, m.dimension, m.regressor_covariance[k]);
    }
  }
  return out;
}

BetaEstimate estimate_beta_and_r(const std::vector<std::vector<Vector>>& trace, std::size_t buffer_length,
                                 double sigma) {
  if (buffer_length == 0) throw Error(ErrorCode::kInvalidParameters, "buffer length must be positive");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kNonPositiveBandwidth, "sigma must be > 0");
  if (trace.size() < 10 * buffer_length) {
    throw Error(ErrorCode::kInsufficientPilot, "pilot trace needs at least 10 B iterations");
  }
  const std::size_t n = trace.front().size();
  const Eigen::Index d = n ? trace.front().front().size() : 0;
  BetaEstimate out;
  out.beta.assign(n, std::vector<Vector>(buffer_length, Vector::Zero(d)));
  out.similarity.assign(n, 1);

  const std::size_t first = buffer_length;
  const double samples = static_cast<double>(trace.size() - first);
  for (std::size_t k = 0; k < n; ++k) {
    double matches = 0.0;
    for (std::size_t t = first; t < trace.size(); ++t) {
      const Vector& now = trace[t][k];
      for (std::size_t i = 0; i < buffer_length; ++i) {
        const Vector& past = trace[t - 1 - i][k];
        for (Eigen::Index j = 0; j < d; ++j) {
          const double ratio = std::abs(now[j]) < 1e-8 ? 1.0 : std::clamp(past[j] / now[j], -2.0, 2.0);
          out.beta[k][i][j] += ratio / samples;
        }
        // Similarity uses offsets 0..B-1 so the current estimate counts itself.
        const Vector& recent = trace[t - i][k];
        if (std::exp(-(now - recent).squaredNorm() / (2.0 * sigma)) >= 0.9) matches += 1.0;
      }
    }
    const double mean = matches / samples;
    out.similarity[k] = static_cast<std::size_t>(
        std::clamp<long>(std::lround(mean), 1, static_cast<long>(buffer_length)));
  }
  return out;
}

}  // namespace diffnet::theory

#pragma once

// Independent reference computations shared by the unit and acceptance suites.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "diffnet/npdlms.hpp"
#include "diffnet/theory.hpp"

namespace oracle {

using diffnet::Matrix;
using diffnet::Vector;

// A random local problem for the gradient check: d <= 4, B <= 5, |N_k| <= 3.
struct GradientInstance {
  std::size_t d = 0;
  diffnet::EstimateBuffer own{1};
  std::vector<diffnet::EstimateBuffer> neighbors;
  std::vector<Vector> neighbor_estimates;
  std::vector<diffnet::Measurement> data;
  Vector previous_self;
  Vector theta;
  diffnet::KernelParams params;

  diffnet::LocalView view() const {
    return {own, neighbors, neighbor_estimates, data, previous_self};
  }
};

inline Vector random_vector(std::size_t d, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& x : v) x = n(rng);
  return v;
}

inline GradientInstance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(1, 4), buf(2, 5), nbrs(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GradientInstance g;
  g.d = dim(rng);
  const std::size_t b = buf(rng);
  const std::size_t size_n = nbrs(rng);
  g.params = {0.5 + unit(rng), 0.5 + unit(rng), 0.1 + 0.6 * unit(rng)};
  g.theta = random_vector(g.d, rng, 0.5);
  g.previous_self = g.theta + random_vector(g.d, rng, 0.2);
  g.own = diffnet::EstimateBuffer(b);
  for (std::size_t i = 0; i < b; ++i) g.own.push(g.theta + random_vector(g.d, rng, 0.4));
  for (std::size_t j = 0; j + 1 < size_n; ++j) {
    const Vector centre = g.theta + random_vector(g.d, rng, 0.3);
    diffnet::EstimateBuffer nb(b);
    for (std::size_t i = 0; i < b; ++i) nb.push(centre + random_vector(g.d, rng, 0.4));
    g.neighbors.push_back(std::move(nb));
    g.neighbor_estimates.push_back(centre);
  }
  for (std::size_t l = 0; l < size_n; ++l) {
    diffnet::RowVector u = random_vector(g.d, rng, 1.0).transpose();
    g.data.push_back(diffnet::make_measurement(u, random_vector(g.d, rng, 1.0), 0.3 * (unit(rng) - 0.5)));
  }
  return g;
}

template <class F>
Vector central_difference(F&& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector plus = x, minus = x;
    plus(i) += h;
    minus(i) -= h;
    g(i) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

inline double gradient_relative_error(const GradientInstance& g, double h = 1e-5) {
  const auto view = g.view();
  const Vector analytic = diffnet::npdlms_gradient(g.theta, view, g.params);
  const Vector numeric = central_difference(
      [&](const Vector& t) { return diffnet::log_local_objective(t, view, g.params); }, g.theta, h);
  return (analytic - numeric).norm() / std::max(analytic.norm(), 1e-300);
}

// Stable characteristic function written out independently of the library.
inline std::complex<double> stable_cf(double a, double b, double g, double d, double t) {
  if (t == 0.0) return {1.0, 0.0};
  const double s = a == 1.0 ? 2.0 / std::numbers::pi * std::log(std::abs(t)) : std::tan(std::numbers::pi * a / 2.0);
  const double sign = t > 0 ? 1.0 : -1.0;
  const double mag = g * std::pow(std::abs(t), a);
  return std::exp(std::complex<double>(-mag, -mag * b * sign * s + d * t));
}

// Kronecker product written out entry by entry.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      for (Eigen::Index p = 0; p < b.rows(); ++p)
        for (Eigen::Index q = 0; q < b.cols(); ++q) out(i * b.rows() + p, j * b.cols() + q) = a(i, j) * b(p, q);
  return out;
}

// Largest eigenvalue modulus from a full nonsymmetric eigendecomposition.
inline double dense_spectral_radius(const Matrix& a) {
  Eigen::EigenSolver<Matrix> solver(a, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

// Steady-state MSD per node from vec(Y) = (I - F kron F)^{-1} vec(Xi), dense LU.
inline std::vector<double> dense_steady_msd(const diffnet::theory::MomentSet& m) {
  const auto n = static_cast<Eigen::Index>(m.nodes * m.dimension);
  const Matrix big = Matrix::Identity(n * n, n * n) - kron(m.transition, m.transition);
  const Vector y = big.partialPivLu().solve(Vector(m.driving.reshaped()));
  const Matrix cov = y.reshaped(n, n);
  std::vector<double> out;
  const auto d = static_cast<Eigen::Index>(m.dimension);
  for (std::size_t k = 0; k < m.nodes; ++k) out.push_back(cov.block(k * d, k * d, d, d).trace());
  return out;
}

}  // namespace oracle

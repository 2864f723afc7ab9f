#include <algorithm>
#include <cmath>
#include <random>

#include "diffnet/theory.hpp"

namespace diffnet::theory {

namespace {

Matrix start_block(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix q(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) q(i, j) = normal(rng);
  return Eigen::HouseholderQR<Matrix>(q).householderQ() * Matrix::Identity(n, p);
}

double ritz_radius(const Matrix& a, const Matrix& q) {
  const Matrix h = q.transpose() * a * q;
  Eigen::EigenSolver<Matrix> solver(h, false);
  if (solver.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

double spectral_radius(const Matrix& matrix, const SpectralOptions& options) {
  if (matrix.rows() != matrix.cols()) throw Error(ErrorCode::kDimensionMismatch, "matrix must be square");
  if (!matrix.allFinite()) throw Error(ErrorCode::kInvalidParameters, "matrix has non-finite entries");
  const Eigen::Index n = matrix.rows();
  if (n == 0) return 0.0;
  const double scale = matrix.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const Matrix a = matrix / scale;
  const Eigen::Index p = std::min<Eigen::Index>(n, 8);

  constexpr int kRestarts = 4;
  constexpr int kStableChecks = 5;
  for (int restart = 0; restart < kRestarts; ++restart) {
    Matrix q = start_block(n, p, 0x5eed0000u + static_cast<std::uint64_t>(restart));
    double previous = ritz_radius(a, q);
    if (p == n) return previous * scale;
    int stable = 0;
    bool broken = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      Matrix z = a * q;
      const double z_norm = z.norm();
      // A^k Q vanished for a generic start block: nilpotent.
      if (!(z_norm > 1e-300)) return 0.0;
      Eigen::HouseholderQR<Matrix> qr(z);
      q = qr.householderQ() * Matrix::Identity(n, p);
      const double current = ritz_radius(a, q);
      if (!std::isfinite(current)) {
        broken = true;
        break;
      }
      if (std::abs(current - previous) <= options.tolerance * std::max(current, 1e-300)) {
        if (++stable >= kStableChecks) return current * scale;
      } else {
        stable = 0;
      }
      previous = current;
    }
    if (!broken) break;
  }
  throw Error(ErrorCode::kNoConvergence, "spectral radius iteration did not settle");
}

}  // namespace diffnet::theory

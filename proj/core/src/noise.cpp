#include "diffnet/noise.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "diffnet/types.hpp"

namespace diffnet {

namespace {

constexpr double kPi = std::numbers::pi;

double sign(double x) { return (x > 0.0) - (x < 0.0); }

// Standard S1 draw with unit scale. The printed characteristic function uses
// the opposite sign on the skew term for alpha != 1; the caller maps it.
double standard_stable(double alpha, double beta, Rng& rng) {
  std::uniform_real_distribution<double> angle(-kPi / 2.0, kPi / 2.0);
  std::exponential_distribution<double> expo(1.0);
  double v = angle(rng);
  // Endpoints of the open interval would blow up cos(v).
  while (std::abs(v) >= kPi / 2.0) v = angle(rng);
  const double w = expo(rng);

  if (alpha == 1.0) {
    const double half_pi_bv = kPi / 2.0 + beta * v;
    return (2.0 / kPi) *
           (half_pi_bv * std::tan(v) - beta * std::log((kPi / 2.0) * w * std::cos(v) / half_pi_bv));
  }
  const double tan_term = beta * std::tan(kPi * alpha / 2.0);
  const double shift = std::atan(tan_term) / alpha;
  const double scale = std::pow(1.0 + tan_term * tan_term, 1.0 / (2.0 * alpha));
  const double av = alpha * (v + shift);
  return scale * std::sin(av) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - av) / w, (1.0 - alpha) / alpha);
}

}  // namespace

void validate(const NoiseSpec& spec) {
  std::ostringstream msg;
  if (const auto* g = std::get_if<GaussianNoise>(&spec)) {
    if (!(g->variance >= 0.0) || !std::isfinite(g->variance)) {
      msg << "gaussian variance must be finite and >= 0, got " << g->variance;
      throw Error(ErrorCode::kInvalidParameters, msg.str());
    }
    return;
  }
  const auto& s = std::get<AlphaStableNoise>(spec);
  if (!(s.alpha > 0.0 && s.alpha <= 2.0)) msg << "alpha must lie in (0, 2]; ";
  if (!(s.beta >= -1.0 && s.beta <= 1.0)) msg << "beta must lie in [-1, 1]; ";
  if (!(s.gamma > 0.0) || !std::isfinite(s.gamma)) msg << "gamma must be > 0; ";
  if (!std::isfinite(s.delta)) msg << "delta must be finite; ";
  if (!msg.str().empty()) throw Error(ErrorCode::kInvalidParameters, msg.str());
}

double sample(const NoiseSpec& spec, Rng& rng) {
  validate(spec);
  if (const auto* g = std::get_if<GaussianNoise>(&spec)) {
    if (g->variance == 0.0) return 0.0;
    std::normal_distribution<double> normal(0.0, std::sqrt(g->variance));
    return normal(rng);
  }
  const auto& s = std::get<AlphaStableNoise>(spec);
  if (s.alpha == 1.0) {
    const double c = s.gamma;
    return c * standard_stable(1.0, s.beta, rng) + (2.0 / kPi) * s.beta * c * std::log(c) + s.delta;
  }
  const double c = std::pow(s.gamma, 1.0 / s.alpha);
  return c * standard_stable(s.alpha, -s.beta, rng) + s.delta;
}

std::complex<double> characteristic_function(const AlphaStableNoise& spec, double t) {
  if (t == 0.0) return {1.0, 0.0};
  const double at = std::abs(t);
  const double skew_term =
      spec.alpha == 1.0 ? (2.0 / kPi) * std::log(at) : std::tan(kPi * spec.alpha / 2.0);
  const double magnitude = spec.gamma * std::pow(at, spec.alpha);
  const std::complex<double> exponent(-magnitude,
                                      -magnitude * spec.beta * sign(t) * skew_term + spec.delta * t);
  return std::exp(exponent);
}

}  // namespace diffnet

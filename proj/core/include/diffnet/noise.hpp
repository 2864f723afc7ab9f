#pragma once

#include <complex>
#include <random>
#include <variant>

namespace diffnet {

using Rng = std::mt19937_64;

struct GaussianNoise {
  double variance = 0.0;
};

/// Stable law pinned to the characteristic function
///   phi(t) = exp(-gamma |t|^alpha [1 + i beta sign(t) S(t, alpha)] + i delta t)
/// with S = tan(pi alpha / 2) for alpha != 1 and (2/pi) log|t| for alpha == 1.
struct AlphaStableNoise {
  double alpha = 2.0;
  double beta = 0.0;
  double gamma = 1.0;
  double delta = 0.0;
};

using NoiseSpec = std::variant<GaussianNoise, AlphaStableNoise>;

/// Throws Error(kInvalidParameters) when a field is outside its admissible range.
void validate(const NoiseSpec& spec);

/// One i.i.d. draw. Stable draws use the Chambers-Mallows-Stuck transform.
double sample(const NoiseSpec& spec, Rng& rng);

std::complex<double> characteristic_function(const AlphaStableNoise& spec, double t);

}  // namespace diffnet

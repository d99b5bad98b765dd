#pragma once

#include "conveyor/rng.hpp"
#include "conveyor/trap_model.hpp"

#include <optional>

namespace conveyor {

// Thermal distribution of differential light shifts. Support is [delta0, inf)
// in the variable x = (delta_ls - delta0) * sign(-delta0); for the red-detuned
// trap (delta0 < 0) that is delta_ls in [delta0, inf).
struct LightShiftDistribution
{
  double delta0 = 0.0; // rad/s
  double K = 0.0;      // s

  static LightShiftDistribution from(DerivedTrapParams const &p) { return {p.delta0, p.K}; }
  double t2_star() const { return t2_star_per_K * K; }
};

struct EnsembleSpec
{
  double temperature = 0.0;                 // K
  double k_B = PhysConstants{}.k_B;
  std::optional<double> truncation_energy;  // J; atoms at or above are rejected

  static EnsembleSpec from(TrapConfig const &trap, bool truncate = false);
};

// Envelope coefficient, 1.67^2 rounded. T2* = 1.67 K is the 1/e time of the envelope.
inline constexpr double envelope_coefficient = 2.79;

enum class LineshapeForm
{
  rounded, // alpha(t) cos[(delta + delta0) t]
  exact, // full characteristic function including the chirp phase
};

double lightshift_pdf(double delta_ls, LightShiftDistribution const &dist);

// Fraction of the 3D Maxwell-Boltzmann energy distribution below E = x k_B T,
// the regularized lower incomplete gamma function P(3/2, x).
double thermal_energy_cdf(double x);

// Gamma(3/2, k_B T) energy; rejection-truncated when requested.
// Throws ConfigError when the acceptance probability is below 1%.
double sample_energy(EnsembleSpec const &spec, RngStream &rng);

double sample_lightshift(LightShiftDistribution const &dist, RngStream &rng);

// Envelope [1 + 2.79 (t / T2*)^2]^(-3/4) with T2* = 1.67 K.
double ramsey_envelope(double t, LightShiftDistribution const &dist);

// |<exp(i delta_ls t)>| = (1 + (t/K)^2)^(-3/4).
double exact_envelope(double t, LightShiftDistribution const &dist);

// Chirp phase (3/2) atan(t/K) carried by the exact ensemble average.
double chirp_phase(double t, LightShiftDistribution const &dist);

double ramsey_signal(double t, double detuning, LightShiftDistribution const &dist, LineshapeForm form);

// Echo signal for t >= tau_pi.
double echo_signal(double t, double tau_pi, double detuning, LightShiftDistribution const &dist, LineshapeForm form);

} // namespace conveyor

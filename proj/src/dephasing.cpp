#include "conveyor/dephasing.hpp"

#include "conveyor/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace conveyor {

EnsembleSpec EnsembleSpec::from(TrapConfig const &trap, bool truncate)
{
  EnsembleSpec spec;
  spec.temperature = trap.temperature;
  spec.k_B = trap.constants.k_B;
  if (truncate) { spec.truncation_energy = trap.depth_U0; }
  return spec;
}

double lightshift_pdf(double delta_ls, LightShiftDistribution const &dist)
{
  // Distance from the bottom-of-well shift, measured toward zero shift.
  double const x = dist.delta0 <= 0.0 ? delta_ls - dist.delta0 : dist.delta0 - delta_ls;
  if (x < 0.0) { return 0.0; }
  double const K = dist.K;
  return 2.0 * std::pow(K, 1.5) / std::sqrt(std::numbers::pi) * std::sqrt(x) * std::exp(-K * x);
}

double thermal_energy_cdf(double x)
{
  if (x <= 0.0) { return 0.0; }
  return std::erf(std::sqrt(x)) - 2.0 * std::sqrt(x / std::numbers::pi) * std::exp(-x);
}

double sample_energy(EnsembleSpec const &spec, RngStream &rng)
{
  if (!(spec.temperature >= 0.0)) { throw ValidationError("ensemble.temperature", "must be non-negative"); }
  if (spec.temperature == 0.0) { return 0.0; }
  double const kT = spec.k_B * spec.temperature;
  std::gamma_distribution<double> gamma(1.5, kT);
  if (!spec.truncation_energy) { return gamma(rng); }
  double const cut = *spec.truncation_energy;
  if (thermal_energy_cdf(cut / kT) < 0.01) {
    throw ConfigError("energy truncation rejects more than 99% of the thermal ensemble");
  }
  for (;;) {
    double const e = gamma(rng);
    if (e < cut) { return e; }
  }
}

double sample_lightshift(LightShiftDistribution const &dist, RngStream &rng)
{
  if (std::isinf(dist.K)) { return dist.delta0; }
  std::gamma_distribution<double> gamma(1.5, 1.0 / dist.K);
  double const x = gamma(rng);
  return dist.delta0 <= 0.0 ? dist.delta0 + x : dist.delta0 - x;
}

double ramsey_envelope(double t, LightShiftDistribution const &dist)
{
  double const r = t / dist.t2_star();
  return std::pow(1.0 + envelope_coefficient * r * r, -0.75);
}

double exact_envelope(double t, LightShiftDistribution const &dist)
{
  double const r = t / dist.K;
  return std::pow(1.0 + r * r, -0.75);
}

double chirp_phase(double t, LightShiftDistribution const &dist)
{
  // The distribution extends from delta0 toward zero shift; the phase follows that direction.
  double const direction = dist.delta0 <= 0.0 ? 1.0 : -1.0;
  return direction * 1.5 * std::atan(t / dist.K);
}

double ramsey_signal(double t, double detuning, LightShiftDistribution const &dist, LineshapeForm form)
{
  double const carrier = (detuning + dist.delta0) * t;
  if (form == LineshapeForm::rounded) { return ramsey_envelope(t, dist) * std::cos(carrier); }
  return exact_envelope(t, dist) * std::cos(carrier + chirp_phase(t, dist));
}

double echo_signal(double t, double tau_pi, double detuning, LightShiftDistribution const &dist, LineshapeForm form)
{
  if (t < tau_pi) { throw ConfigError("echo signal is defined only after the pi pulse"); }
  double const s = t - 2.0 * tau_pi;
  double const carrier = (detuning + dist.delta0) * s;
  if (form == LineshapeForm::rounded) { return -ramsey_envelope(std::abs(s), dist) * std::cos(carrier); }
  return -exact_envelope(s, dist) * std::cos(carrier + chirp_phase(s, dist));
}

} // namespace conveyor

#include "conveyor/trap_model.hpp"

#include "conveyor/errors.hpp"

#include <cmath>
#include <limits>

namespace conveyor {

void TrapConfig::validate() const
{
  constants.validate();
  if (!std::isfinite(depth_U0) || depth_U0 < 0.0) { throw ValidationError("trap.depth", "must be finite and non-negative"); }
  if (!std::isfinite(wavelength) || wavelength <= 0.0) { throw ValidationError("trap.wavelength", "must be finite and positive"); }
  if (!std::isfinite(effective_detuning) || effective_detuning == 0.0) {
    throw ValidationError("trap.detuning", "must be finite and nonzero");
  }
  if (!std::isfinite(temperature) || temperature <= 0.0) { throw ValidationError("trap.temperature", "must be finite and positive"); }
  if (!std::isfinite(waist) || waist <= 0.0) { throw ValidationError("trap.waist", "must be finite and positive"); }
}

DerivedTrapParams derive_trap_params(TrapConfig const &trap)
{
  trap.validate();
  auto const &c = trap.constants;
  DerivedTrapParams p;
  p.eta = c.omega_hfs / trap.effective_detuning;
  p.delta0 = p.eta * trap.depth_U0 / c.hbar;
  p.shift_per_energy = std::abs(p.eta) / (2.0 * c.hbar);
  p.depth_U0 = trap.depth_U0;
  if (trap.depth_U0 == 0.0) {
    // No trap light, no differential shift, no inhomogeneous dephasing.
    p.K = std::numeric_limits<double>::infinity();
    p.T2_star = std::numeric_limits<double>::infinity();
  } else {
    p.K = 2.0 * c.hbar / (std::abs(p.eta) * c.k_B * trap.temperature);
    p.T2_star = t2_star_per_K * p.K;
  }
  double const k = two_pi / trap.wavelength;
  p.omega_axial = k * std::sqrt(2.0 * trap.depth_U0 / c.atom_mass);
  p.omega_radial = std::sqrt(4.0 * trap.depth_U0 / (c.atom_mass * trap.waist * trap.waist));
  return p;
}

double mean_lightshift(double energy, DerivedTrapParams const &params)
{
  if (!(energy >= 0.0)) { throw ValidationError("energy", "must be non-negative"); }
  if (params.depth_U0 == 0.0) { return 0.0; } // no trap light, no shift
  return params.delta0 - std::copysign(params.shift_per_energy * energy, params.eta);
}

double temperature_for_t2_star(double t2_star, TrapConfig const &trap)
{
  if (!(t2_star > 0.0)) { throw ValidationError("t2_star", "must be positive"); }
  auto const &c = trap.constants;
  double const eta = std::abs(c.omega_hfs / trap.effective_detuning);
  double const K = t2_star / t2_star_per_K;
  return 2.0 * c.hbar / (eta * c.k_B * K);
}

} // namespace conveyor

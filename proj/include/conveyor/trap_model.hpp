#pragma once

#include "conveyor/units.hpp"

namespace conveyor {

// Standing-wave dipole trap. All fields in SI units.
struct TrapConfig
{
  double depth_U0 = 1e-3 * 1.380649e-23;            // J
  double wavelength = 1064e-9;                      // m
  double effective_detuning = two_pi * -64e12;      // rad/s, signed (negative = red)
  double temperature = 0.2e-3;                      // K
  double waist = 20e-6;                             // m, radial only
  PhysConstants constants{};

  // Throws ValidationError naming the first offending field.
  void validate() const;
};

struct DerivedTrapParams
{
  double eta = 0.0;             // omega_hfs / Delta, signed
  double delta0 = 0.0;          // rad/s, maximal differential light shift; sign follows Delta
  double K = 0.0;               // s, light-shift distribution time constant, positive
  double T2_star = 0.0;         // s, 1.67 K; +inf in the zero-depth limit
  double omega_axial = 0.0;     // rad/s
  double omega_radial = 0.0;    // rad/s
  double depth_U0 = 0.0;        // J, copied from the trap
  double shift_per_energy = 0.0; // rad/s per J, |eta| / (2 hbar)
};

// Ratio of T2* to K, the 1/e time of the Ramsey envelope in units of K.
inline constexpr double t2_star_per_K = 1.67;

DerivedTrapParams derive_trap_params(TrapConfig const &trap);

// Energy-averaged light shift of an atom with energy E above the well bottom:
// delta0 + |eta| E / (2 hbar). The magnitude shrinks with E and reaches zero at E = 2 U0.
// Zero at zero depth.
double mean_lightshift(double energy, DerivedTrapParams const &params);

// Temperature at which the trap's Ramsey envelope has the given T2*.
double temperature_for_t2_star(double t2_star, TrapConfig const &trap);

} // namespace conveyor

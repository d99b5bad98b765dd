#pragma once

#include <numbers>
#include <string_view>

namespace conveyor {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Physical constants. Defaults are CODATA 2018 values and cesium-133.
struct PhysConstants
{
  double hbar = 1.054571817e-34;                      // J s
  double k_B = 1.380649e-23;                          // J/K
  double atom_mass = 132.905451961 * 1.66053906660e-27; // kg
  double omega_hfs = two_pi * 9.192631770e9;          // rad/s

  void validate() const;
};

enum class Dimension
{
  energy,    // J, or temperature via E = k_B T
  frequency, // rad/s, or cyclic via 2 pi
  time,
  length,
  acceleration,
  rate,
  dimensionless,
};

// Dimension of a unit symbol, throwing ConfigError for unknown symbols.
Dimension unit_dimension(std::string_view unit);

// Exact linear conversion between two units of the same dimension.
// Temperature units convert to energy through k_B; cyclic frequencies
// (Hz, kHz, ...) convert to angular ones through 2 pi.
double convert_units(double value,
                     std::string_view from_unit,
                     std::string_view to_unit,
                     PhysConstants const &constants = {});

// Convert to the internal SI unit of the dimension (J, rad/s, s, m, m/s^2, 1/s).
double to_si(double value, std::string_view unit, PhysConstants const &constants = {});

std::string_view si_unit(Dimension d);

// "1.5 mK", "2ms" or a bare number (dimensionless only), converted to SI.
// Throws ConfigError on malformed text or a dimension mismatch.
double parse_quantity(std::string_view text, Dimension expected, PhysConstants const &constants = {});

} // namespace conveyor

#include "conveyor/units.hpp"

#include "conveyor/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <string>

namespace conveyor {

void PhysConstants::validate() const
{
  auto check = [](double v, char const *name) {
    if (!std::isfinite(v) || v <= 0.0) { throw ValidationError(name, "must be finite and positive"); }
  };
  check(hbar, "constants.hbar");
  check(k_B, "constants.k_B");
  check(atom_mass, "constants.atom_mass");
  check(omega_hfs, "constants.omega_hfs");
}

namespace {

enum class Kind
{
  plain,       // value * scale gives SI
  temperature, // value * scale gives kelvin, then * k_B
  cyclic,      // value * scale gives Hz, then * 2 pi
};

struct UnitInfo
{
  std::string_view symbol;
  Dimension dim;
  Kind kind;
  double scale;
};

constexpr std::array<UnitInfo, 32> units{{
  {"J", Dimension::energy, Kind::plain, 1.0},
  {"K", Dimension::energy, Kind::temperature, 1.0},
  {"mK", Dimension::energy, Kind::temperature, 1e-3},
  {"µK", Dimension::energy, Kind::temperature, 1e-6},
  {"uK", Dimension::energy, Kind::temperature, 1e-6},
  {"nK", Dimension::energy, Kind::temperature, 1e-9},
  {"rad/s", Dimension::frequency, Kind::plain, 1.0},
  {"Hz", Dimension::frequency, Kind::cyclic, 1.0},
  {"kHz", Dimension::frequency, Kind::cyclic, 1e3},
  {"MHz", Dimension::frequency, Kind::cyclic, 1e6},
  {"GHz", Dimension::frequency, Kind::cyclic, 1e9},
  {"THz", Dimension::frequency, Kind::cyclic, 1e12},
  {"s", Dimension::time, Kind::plain, 1.0},
  {"ms", Dimension::time, Kind::plain, 1e-3},
  {"µs", Dimension::time, Kind::plain, 1e-6},
  {"us", Dimension::time, Kind::plain, 1e-6},
  {"ns", Dimension::time, Kind::plain, 1e-9},
  {"m", Dimension::length, Kind::plain, 1.0},
  {"mm", Dimension::length, Kind::plain, 1e-3},
  {"µm", Dimension::length, Kind::plain, 1e-6},
  {"um", Dimension::length, Kind::plain, 1e-6},
  {"nm", Dimension::length, Kind::plain, 1e-9},
  {"m/s^2", Dimension::acceleration, Kind::plain, 1.0},
  {"m/s2", Dimension::acceleration, Kind::plain, 1.0},
  {"1/s", Dimension::rate, Kind::plain, 1.0},
  {"1/ms", Dimension::rate, Kind::plain, 1e3},
  {"1/us", Dimension::rate, Kind::plain, 1e6},
  {"1/µs", Dimension::rate, Kind::plain, 1e6},
  {"1", Dimension::dimensionless, Kind::plain, 1.0},
  {"%", Dimension::dimensionless, Kind::plain, 1e-2},
  {"ppm", Dimension::dimensionless, Kind::plain, 1e-6},
  {"U0", Dimension::dimensionless, Kind::plain, 1.0},
}};

UnitInfo const &lookup(std::string_view unit)
{
  for (auto const &u : units) {
    if (u.symbol == unit) { return u; }
  }
  throw ConfigError("unsupported unit '" + std::string(unit) + "'");
}

double info_to_si(double value, UnitInfo const &u, PhysConstants const &c)
{
  switch (u.kind) {
  case Kind::temperature: return value * u.scale * c.k_B;
  case Kind::cyclic: return value * u.scale * two_pi;
  case Kind::plain: break;
  }
  return value * u.scale;
}

double info_from_si(double value, UnitInfo const &u, PhysConstants const &c)
{
  switch (u.kind) {
  case Kind::temperature: return value / c.k_B / u.scale;
  case Kind::cyclic: return value / two_pi / u.scale;
  case Kind::plain: break;
  }
  return value / u.scale;
}

} // namespace

Dimension unit_dimension(std::string_view unit) { return lookup(unit).dim; }

double convert_units(double value, std::string_view from_unit, std::string_view to_unit, PhysConstants const &constants)
{
  auto const &from = lookup(from_unit);
  auto const &to = lookup(to_unit);
  if (from.dim != to.dim) {
    throw ConfigError("cannot convert '" + std::string(from_unit) + "' to '" + std::string(to_unit) + "'");
  }
  if (from.kind == to.kind) { return value * (from.scale / to.scale); }
  return info_from_si(info_to_si(value, from, constants), to, constants);
}

double to_si(double value, std::string_view unit, PhysConstants const &constants)
{
  return info_to_si(value, lookup(unit), constants);
}

std::string_view si_unit(Dimension d)
{
  switch (d) {
  case Dimension::energy: return "J";
  case Dimension::frequency: return "rad/s";
  case Dimension::time: return "s";
  case Dimension::length: return "m";
  case Dimension::acceleration: return "m/s^2";
  case Dimension::rate: return "1/s";
  case Dimension::dimensionless: return "1";
  }
  return "1";
}

double parse_quantity(std::string_view text, Dimension expected, PhysConstants const &constants)
{
  auto const begin = text.find_first_not_of(" \t");
  if (begin == std::string_view::npos) { throw ConfigError("empty quantity"); }
  text.remove_prefix(begin);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{}) { throw ConfigError("not a quantity: '" + std::string(text) + "'"); }
  std::string_view unit(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
  while (!unit.empty() && (unit.front() == ' ' || unit.front() == '\t')) { unit.remove_prefix(1); }
  while (!unit.empty() && (unit.back() == ' ' || unit.back() == '\t')) { unit.remove_suffix(1); }
  if (unit.empty()) {
    if (expected != Dimension::dimensionless) {
      throw ConfigError("'" + std::string(text) + "' needs a unit (" + std::string(si_unit(expected)) + " or compatible)");
    }
    return value;
  }
  if (unit_dimension(unit) != expected) {
    throw ConfigError("unit '" + std::string(unit) + "' has the wrong dimension, expected " + std::string(si_unit(expected)));
  }
  return to_si(value, unit, constants);
}

} // namespace conveyor

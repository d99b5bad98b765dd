#include "conveyor/transport.hpp"

#include "conveyor/csv.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/parallel.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace conveyor {

AccelProfile::AccelProfile(std::vector<AccelSegment> segments)
  : segments_(std::move(segments))
{
  for (auto const &s : segments_) {
    if (!(s.duration >= 0.0) || !std::isfinite(s.duration) || !std::isfinite(s.acceleration)) {
      throw ConfigError("acceleration segments need finite, non-negative durations");
    }
  }
}

double AccelProfile::duration() const
{
  return std::accumulate(segments_.begin(), segments_.end(), 0.0,
                         [](double acc, AccelSegment const &s) { return acc + s.duration; });
}

double AccelProfile::final_velocity() const
{
  double v = 0.0;
  for (auto const &s : segments_) { v += s.acceleration * s.duration; }
  return v;
}

double AccelProfile::displacement_at(double t) const
{
  double x = 0.0;
  double v = 0.0;
  double t0 = 0.0;
  for (auto const &s : segments_) {
    double const dt = std::clamp(t - t0, 0.0, s.duration);
    x += v * dt + 0.5 * s.acceleration * dt * dt;
    v += s.acceleration * dt;
    t0 += s.duration;
    if (t <= t0) { break; }
  }
  return x;
}

double AccelProfile::displacement() const { return displacement_at(duration()); }

double AccelProfile::acceleration_at(double t) const
{
  double t0 = 0.0;
  for (auto const &s : segments_) {
    if (t >= t0 && t < t0 + s.duration) { return s.acceleration; }
    t0 += s.duration;
  }
  return 0.0;
}

std::vector<double> AccelProfile::jump_times() const
{
  std::vector<double> jumps;
  double previous = 0.0;
  double t = 0.0;
  for (auto const &s : segments_) {
    if (s.duration == 0.0) { continue; }
    if (s.acceleration != previous) { jumps.push_back(t); }
    previous = s.acceleration;
    t += s.duration;
  }
  if (previous != 0.0) { jumps.push_back(t); }
  return jumps;
}

double AccelProfile::peak_acceleration() const
{
  double peak = 0.0;
  for (auto const &s : segments_) { peak = std::max(peak, std::abs(s.acceleration)); }
  return peak;
}

AccelProfile AccelProfile::delayed(double delay) const
{
  std::vector<AccelSegment> segs{{delay, 0.0}};
  segs.insert(segs.end(), segments_.begin(), segments_.end());
  return AccelProfile(std::move(segs));
}

AccelProfile AccelProfile::time_reversed() const
{
  return AccelProfile(std::vector<AccelSegment>(segments_.rbegin(), segments_.rend()));
}

AccelProfile make_accel_profile(double distance, double t_move, ProfileKind kind, double hold)
{
  if (!(distance >= 0.0)) { throw ConfigError("transport distance must be non-negative"); }
  if (!(t_move > 0.0)) { throw ConfigError("transport duration must be positive"); }
  if (!(hold >= 0.0)) { throw ConfigError("hold time must be non-negative"); }
  double const a = 4.0 * distance / (t_move * t_move);
  double const half = 0.5 * t_move;
  if (kind == ProfileKind::bang_bang_one_way) { return AccelProfile({{half, a}, {half, -a}}); }
  return AccelProfile({{half, a}, {half, -a}, {hold, 0.0}, {half, -a}, {half, a}});
}

// ---------------------------------------------------------------------------

double lattice_potential(double position, TrapConfig const &trap)
{
  double const s = std::sin(two_pi / trap.wavelength * position);
  return trap.depth_U0 * s * s;
}

AtomPhaseState make_atom_state(double position, double velocity, TrapConfig const &trap)
{
  return {position, velocity, 0.5 * trap.constants.atom_mass * velocity * velocity + lattice_potential(position, trap)};
}

double axial_period(TrapConfig const &trap) { return two_pi / derive_trap_params(trap).omega_axial; }

double orbit_period(double energy, TrapConfig const &trap)
{
  if (!(energy >= 0.0 && energy < trap.depth_U0)) { throw ConfigError("orbit energy must lie in [0, U0)"); }
  double const kappa = std::sqrt(energy / trap.depth_U0);
  return 4.0 * std::comp_ellint_1(kappa) / derive_trap_params(trap).omega_axial;
}

namespace {

// Fourth-order symmetric composition of velocity-Verlet (Yoshida).
double const cbrt2 = std::cbrt(2.0);
double const yoshida_outer = 1.0 / (2.0 - cbrt2);
double const yoshida_inner = -cbrt2 / (2.0 - cbrt2);

struct Stepper
{
  double k2;         // 2 k
  double force_coef; // U0 k / m
  bool free = false;

  double accel(double z, double frame) const
  {
    return free ? -frame : -force_coef * std::sin(k2 * z) - frame;
  }

  void verlet(double &z, double &v, double h, double frame) const
  {
    v += 0.5 * h * accel(z, frame);
    z += h * v;
    v += 0.5 * h * accel(z, frame);
  }

  void step(double &z, double &v, double h, double frame) const
  {
    verlet(z, v, yoshida_outer * h, frame);
    verlet(z, v, yoshida_inner * h, frame);
    verlet(z, v, yoshida_outer * h, frame);
  }
};

void check_dt(double dt, TrapConfig const &trap)
{
  double const period = axial_period(trap);
  if (!(dt > 0.0) || dt > period / 200.0 * (1.0 + 1e-9)) {
    throw ConfigError("time step must be positive and at most T_axial/200");
  }
}

} // namespace

TrajectoryResult integrate_trajectory(AtomPhaseState const &initial, AccelProfile const &profile,
                                      TrapConfig const &trap, double dt, std::size_t record_every)
{
  trap.validate();
  check_dt(dt, trap);
  double const k = two_pi / trap.wavelength;
  double const m = trap.constants.atom_mass;
  double const U0 = trap.depth_U0;
  Stepper stepper{2.0 * k, U0 * k / m};

  TrajectoryResult result;
  double z = initial.position;
  double v = initial.velocity;
  double t = 0.0;
  auto energy = [&] {
    double const s = std::sin(k * z);
    return 0.5 * m * v * v + U0 * s * s;
  };
  auto record = [&] { result.trajectory.push_back({t, z, v, energy() / U0}); };
  if (record_every > 0) { record(); }
  if (energy() >= U0) {
    result.escaped = true;
    stepper.free = true;
  }

  std::size_t step_count = 0;
  for (auto const &seg : profile.segments()) {
    if (seg.duration == 0.0) { continue; }
    auto const n = static_cast<std::size_t>(std::max(1.0, std::ceil(seg.duration / dt - 1e-9)));
    double const h = seg.duration / static_cast<double>(n);
    double const t_seg = t;
    for (std::size_t i = 0; i < n; ++i) {
      stepper.step(z, v, h, seg.acceleration);
      t = t_seg + h * static_cast<double>(i + 1);
      if (!result.escaped && energy() >= U0) {
        result.escaped = true;
        result.escape_time = t;
        stepper.free = true;
      }
      if (record_every > 0 && ++step_count % record_every == 0) { record(); }
    }
  }
  result.final = {z, v, energy()};
  return result;
}

std::vector<AtomPhaseState> orbit_states(double energy, std::size_t n, TrapConfig const &trap, double dt)
{
  check_dt(dt, trap);
  double const U0 = trap.depth_U0;
  double const k = two_pi / trap.wavelength;
  double const period = orbit_period(energy, trap);
  double const z_turn = std::asin(std::sqrt(energy / U0)) / k;
  double const spacing = period / static_cast<double>(n);
  auto const sub = static_cast<std::size_t>(std::max(1.0, std::ceil(spacing / dt)));
  double const h = spacing / static_cast<double>(sub);
  Stepper stepper{2.0 * k, U0 * k / trap.constants.atom_mass};

  std::vector<AtomPhaseState> states;
  states.reserve(n);
  double z = z_turn;
  double v = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    states.push_back(make_atom_state(z, v, trap));
    for (std::size_t i = 0; i < sub; ++i) { stepper.step(z, v, h, 0.0); }
  }
  return states;
}

HeatingStats heating_stats(double E0, std::size_t n_phases, AccelProfile const &profile, TrapConfig const &trap,
                           double dt, unsigned threads)
{
  if (n_phases < 32) { throw ConfigError("heating statistics need at least 32 phases"); }
  auto const starts = orbit_states(E0, n_phases, trap, dt);
  HeatingStats stats;
  stats.gains.assign(n_phases, 0.0);
  std::vector<char> escaped(n_phases, 0);
  parallel_for(n_phases, threads, [&](std::size_t i) {
    auto const r = integrate_trajectory(starts[i], profile, trap, dt);
    stats.gains[i] = r.final.energy - starts[i].energy;
    escaped[i] = r.escaped ? 1 : 0;
  });
  stats.escaped.assign(escaped.begin(), escaped.end());
  stats.escaped_count = static_cast<std::size_t>(std::count(escaped.begin(), escaped.end(), 1));
  stats.max_gain = *std::max_element(stats.gains.begin(), stats.gains.end());
  stats.mean_gain = std::accumulate(stats.gains.begin(), stats.gains.end(), 0.0) / static_cast<double>(n_phases);
  return stats;
}

WorstCaseHeating worst_case_heating(double E0, std::size_t n_phases, AccelProfile const &profile,
                                    TrapConfig const &trap, double dt)
{
  if (n_phases < 32) { throw ConfigError("heating statistics need at least 32 phases"); }
  check_dt(dt, trap);
  double const k = two_pi / trap.wavelength;
  double const m = trap.constants.atom_mass;
  double const U0 = trap.depth_U0;
  Stepper const stepper{2.0 * k, U0 * k / m};
  auto energy = [&](double z, double v) {
    double const s = std::sin(k * z);
    return 0.5 * m * v * v + U0 * s * s;
  };

  auto const start = orbit_states(E0, 1, trap, dt).front();
  double z = start.position;
  double v = start.velocity;
  double frame = 0.0;
  WorstCaseHeating result;

  auto jump_to = [&](double next) {
    double const before = energy(z, v) + m * frame * z;
    double const e = std::min(energy(z, v), 0.999 * U0);
    double const span = orbit_period(e, trap) * 1.05;
    double const spacing = span / static_cast<double>(n_phases);
    auto const sub = static_cast<std::size_t>(std::max(1.0, std::ceil(spacing / dt)));
    double const h = spacing / static_cast<double>(sub);
    double best = -std::numeric_limits<double>::infinity();
    double bz = z;
    double bv = v;
    for (std::size_t j = 0; j < n_phases; ++j) {
      double const after = energy(z, v) + m * next * z;
      if (after > best) {
        best = after;
        bz = z;
        bv = v;
      }
      for (std::size_t i = 0; i < sub; ++i) { stepper.step(z, v, h, frame); }
    }
    z = bz;
    v = bv;
    result.jump_gains.push_back(best - before);
    frame = next;
  };

  for (auto const &seg : profile.segments()) {
    if (seg.duration > 0.0 && seg.acceleration != frame) { jump_to(seg.acceleration); }
  }
  if (frame != 0.0) { jump_to(0.0); }
  result.gain = energy(z, v) - start.energy;
  return result;
}

HeatingTable HeatingTable::build(AccelProfile const &profile, TrapConfig const &trap, std::size_t n_energies,
                                 std::size_t n_phases, double steps_per_period, unsigned threads)
{
  if (n_energies < 2) { throw ConfigError("heating table needs at least 2 energies"); }
  HeatingTable table;
  table.depth_ = trap.depth_U0;
  double const dt = axial_period(trap) / steps_per_period;
  // Grid on [0, 0.98 U0]; deeper-lying orbits are not resolved further.
  for (std::size_t i = 0; i < n_energies; ++i) {
    table.energies_.push_back(0.98 * trap.depth_U0 * static_cast<double>(i) / static_cast<double>(n_energies - 1));
  }
  table.stats_.resize(n_energies);
  parallel_for(n_energies, threads, [&](std::size_t i) {
    table.stats_[i] = heating_stats(table.energies_[i], n_phases, profile, trap, dt, 1);
  });
  return table;
}

std::optional<double> HeatingTable::apply(double energy, RngStream &rng) const
{
  if (energy >= depth_) { return std::nullopt; }
  double const spacing = energies_[1] - energies_[0];
  auto const idx = static_cast<std::size_t>(std::lround(energy / spacing));
  if (idx >= energies_.size()) { return std::nullopt; }
  auto const &s = stats_[idx];
  std::uniform_int_distribution<std::size_t> pick(0, s.gains.size() - 1);
  std::size_t const j = pick(rng);
  if (s.escaped[j]) { return std::nullopt; }
  double const after = std::max(0.0, energy + s.gains[j]);
  if (after >= depth_) { return std::nullopt; }
  return after;
}

RampResult adiabatic_ramp(double energy, double U0_from, double U0_to)
{
  if (!(U0_from > 0.0 && U0_to > 0.0)) { throw ConfigError("ramp depths must be positive"); }
  double const e = U0_from == U0_to ? energy : energy * std::sqrt(U0_to / U0_from);
  return {e, e >= U0_to};
}

double survival_fraction(EnsembleSpec const &ensemble, std::vector<PipelineStep> const &pipeline,
                         TrapConfig const &trap, RngStream &rng, SurvivalOptions const &options)
{
  if (pipeline.empty()) { return 1.0; }
  // Tables depend on the depth at which each transport happens.
  std::vector<HeatingTable> tables;
  double depth = trap.depth_U0;
  for (auto const &step : pipeline) {
    if (auto const *r = std::get_if<RampStep>(&step)) {
      depth = r->to_depth;
    } else {
      TrapConfig at = trap;
      at.depth_U0 = depth;
      tables.push_back(HeatingTable::build(std::get<TransportStep>(step).profile, at, options.table_energies,
                                           options.table_phases, options.steps_per_period, options.threads));
    }
  }

  std::size_t survivors = 0;
  for (std::size_t a = 0; a < options.atoms; ++a) {
    double e = sample_energy(ensemble, rng);
    double current = trap.depth_U0;
    std::size_t table = 0;
    bool lost = false;
    for (auto const &step : pipeline) {
      if (auto const *r = std::get_if<RampStep>(&step)) {
        auto const res = adiabatic_ramp(e, current, r->to_depth);
        e = res.energy;
        current = r->to_depth;
        lost = res.lost;
      } else {
        auto const next = tables[table++].apply(e, rng);
        lost = !next;
        if (next) { e = *next; }
      }
      if (lost) { break; }
    }
    if (!lost) { ++survivors; }
  }
  return static_cast<double>(survivors) / static_cast<double>(options.atoms);
}

void write_trajectory(std::ostream &out, std::vector<TrajectorySample> const &trajectory)
{
  out << "t_s,z_m,v_mps,E_over_U0\n";
  for (auto const &s : trajectory) {
    out << csv::format(s.t) << ',' << csv::format(s.z) << ',' << csv::format(s.v) << ',' << csv::format(s.E_over_U0)
        << '\n';
  }
}

} // namespace conveyor

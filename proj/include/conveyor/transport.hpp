#pragma once

#include "conveyor/dephasing.hpp"
#include "conveyor/rng.hpp"
#include "conveyor/trap_model.hpp"

#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

namespace conveyor {

struct AccelSegment
{
  double duration = 0.0;     // s
  double acceleration = 0.0; // m/s^2
};

// Piecewise-constant acceleration of the standing wave.
class AccelProfile
{
public:
  AccelProfile() = default;
  explicit AccelProfile(std::vector<AccelSegment> segments);

  std::vector<AccelSegment> const &segments() const { return segments_; }
  double duration() const;
  double final_velocity() const;
  // Analytic displacement of the lattice over the whole profile.
  double displacement() const;
  // Displacement reached at time t.
  double displacement_at(double t) const;
  double acceleration_at(double t) const;
  // Times at which the acceleration changes value, including switching on and off.
  std::vector<double> jump_times() const;
  double peak_acceleration() const;

  // Same profile preceded by `delay` of zero acceleration.
  AccelProfile delayed(double delay) const;
  // Segments in reverse order: the profile seen under time reversal.
  AccelProfile time_reversed() const;

private:
  std::vector<AccelSegment> segments_;
};

enum class ProfileKind
{
  bang_bang_one_way,
  round_trip,
};

// Bang-bang transport over `distance` in `t_move` (a = 4 d / t_move^2). The
// round trip is an outbound leg, `hold` at rest, and the mirrored return leg.
AccelProfile make_accel_profile(double distance, double t_move, ProfileKind kind, double hold = 3e-3);

// Axial state in the frame comoving with the lattice. Energy is measured from
// the bottom of the well: E = m v^2 / 2 + U0 sin^2(k z).
struct AtomPhaseState
{
  double position = 0.0;
  double velocity = 0.0;
  double energy = 0.0;
};

double lattice_potential(double position, TrapConfig const &trap);
AtomPhaseState make_atom_state(double position, double velocity, TrapConfig const &trap);

// Axial oscillation period of the harmonic limit, 2 pi / omega_axial.
double axial_period(TrapConfig const &trap);
// Period of the anharmonic (pendulum-like) orbit at energy E < U0.
double orbit_period(double energy, TrapConfig const &trap);

inline constexpr double default_steps_per_period = 500.0;

struct TrajectorySample
{
  double t = 0.0;
  double z = 0.0;
  double v = 0.0;
  double E_over_U0 = 0.0;
};

struct TrajectoryResult
{
  AtomPhaseState final;
  bool escaped = false;
  double escape_time = 0.0;
  std::vector<TrajectorySample> trajectory;
};

// Integrates m z'' = -dU/dz - m a(t) with a fourth-order symplectic composition
// of velocity-Verlet steps, aligned so that every acceleration jump falls on a
// step boundary. dt must not exceed T_axial / 200. An atom whose energy reaches
// U0 is flagged as escaped and continues in free flight.
// record_every > 0 stores every n-th step in the trajectory.
TrajectoryResult integrate_trajectory(AtomPhaseState const &initial,
                                      AccelProfile const &profile,
                                      TrapConfig const &trap,
                                      double dt,
                                      std::size_t record_every = 0);

// n states on the unperturbed orbit of energy E, equally spaced in time over
// one period, starting at the positive turning point.
std::vector<AtomPhaseState> orbit_states(double energy, std::size_t n, TrapConfig const &trap, double dt);

struct HeatingStats
{
  double max_gain = 0.0;  // J
  double mean_gain = 0.0; // J
  std::vector<double> gains; // J, one per initial phase
  std::vector<bool> escaped;
  std::size_t escaped_count = 0;
};

// Energy change from the profile for n_phases initial oscillation phases at fixed E0.
HeatingStats heating_stats(double E0, std::size_t n_phases, AccelProfile const &profile, TrapConfig const &trap,
                           double dt, unsigned threads = 1);

struct WorstCaseHeating
{
  double gain = 0.0;              // J, total over the profile
  std::vector<double> jump_gains; // J, one per acceleration jump
};

// Largest energy gain the profile's jumps can produce when the atom meets
// every jump at its least favourable oscillation phase. Before each jump the
// current orbit (in the tilted potential of the running acceleration) is
// integrated over one period and sampled at n_phases points; the sample that
// maximizes the conserved energy after the jump is kept. Segment durations
// only set the phases, so they drop out of this bound.
WorstCaseHeating worst_case_heating(double E0, std::size_t n_phases, AccelProfile const &profile,
                                    TrapConfig const &trap, double dt);

// Heating distributions tabulated on a grid of initial energies, for drawing
// per-atom energy changes inside the coherence Monte Carlo.
class HeatingTable
{
public:
  HeatingTable() = default;
  static HeatingTable build(AccelProfile const &profile, TrapConfig const &trap, std::size_t n_energies = 25,
                            std::size_t n_phases = 32, double steps_per_period = 200.0, unsigned threads = 1);

  // Energy after transport, or nullopt if the atom is lost.
  std::optional<double> apply(double energy, RngStream &rng) const;

  double depth() const { return depth_; }
  std::vector<double> const &energies() const { return energies_; }
  HeatingStats const &stats(std::size_t i) const { return stats_[i]; }

private:
  double depth_ = 0.0;
  std::vector<double> energies_; // J
  std::vector<HeatingStats> stats_;
};

struct RampResult
{
  double energy = 0.0;
  bool lost = false;
};

// Adiabatic change of trap depth in the harmonic approximation: E scales with
// the trap frequency, i.e. with sqrt(U0). The atom is lost if E' >= U0_to.
RampResult adiabatic_ramp(double energy, double U0_from, double U0_to);

struct RampStep
{
  double to_depth = 0.0; // J
};

struct TransportStep
{
  AccelProfile profile;
};

using PipelineStep = std::variant<RampStep, TransportStep>;

struct SurvivalOptions
{
  std::size_t atoms = 20000;
  std::size_t table_energies = 25;
  std::size_t table_phases = 32;
  double steps_per_period = 200.0;
  unsigned threads = 1;
};

// Monte-Carlo fraction of atoms sampled from the ensemble that are never lost
// along the pipeline of ramps and transports starting in `trap`.
double survival_fraction(EnsembleSpec const &ensemble, std::vector<PipelineStep> const &pipeline,
                         TrapConfig const &trap, RngStream &rng, SurvivalOptions const &options = {});

void write_trajectory(std::ostream &out, std::vector<TrajectorySample> const &trajectory);

} // namespace conveyor

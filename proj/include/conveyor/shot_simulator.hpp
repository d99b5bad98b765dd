#pragma once

#include "conveyor/allan.hpp"
#include "conveyor/bloch.hpp"
#include "conveyor/rng.hpp"
#include "conveyor/transport.hpp"
#include "conveyor/trap_model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace conveyor {

// State-selective push-out detection, as survival probabilities.
struct DetectionModel
{
  double p_survive_given_F4 = 0.01;
  double p_survive_given_F3 = 0.95;

  void validate() const;
};

struct MixingLaserConfig
{
  double scattering_rate_peak = 2e3; // 1/s
  double waist = 50e-6;              // m
  double window_duration = 3e-3;     // s, centred on the pi pulse
  double center_position = 0.0;      // m, beam centre relative to the loading position

  void validate() const;
};

struct TransportConfig
{
  double distance = 1e-3;     // m, one way
  double leg_duration = 2e-3; // s, per leg
  double hold = 3e-3;         // s, at the far end, centred on the pi pulse

  void validate() const;
  AccelProfile leg_profile() const;
};

enum class SequenceKind
{
  ramsey,
  echo,
  transport_echo,
};

enum class SweepVariable
{
  delay,  // t, the time between the two pi/2 pulses
  tau_pi, // tau_pi, with t = 2 tau_pi + echo_offset
};

struct SequenceTemplate
{
  SequenceKind kind = SequenceKind::ramsey;
  SweepVariable sweep = SweepVariable::delay;
  std::vector<double> grid; // s
  double tau_pi = 0.0;      // s, fixed value when sweeping the delay
  double echo_offset = 0.0; // s, when sweeping tau_pi
  double detuning = 0.0;    // rad/s, microwave detuning from the free-atom resonance
  PulseParams half = half_pi_pulse();
  PulseParams full = pi_pulse();

  bool has_pi_pulse() const { return kind != SequenceKind::ramsey; }
  // (tau_pi, t) for a swept value.
  std::pair<double, double> timing(double x) const;
};

enum class AtomCountMode
{
  poisson,
  fixed,
};

struct ExperimentConfig
{
  TrapConfig trap;
  SequenceTemplate sequence;
  std::size_t shots_per_point = 30;
  double atoms_per_shot = 50.0;
  AtomCountMode atom_count = AtomCountMode::poisson;
  double prep_efficiency = 0.8;
  double transfer_survival = 0.8;
  DetectionModel detection;
  // Homogeneous pointing noise; delta0 is taken from the trap.
  std::optional<VisibilityModel> noise;
  std::optional<TransportConfig> transport;
  std::optional<MixingLaserConfig> mixing;
  std::optional<double> t1; // s
  // Adiabatic lowering from a deeper loading trap before the sequence; atoms
  // drawn at the loading temperature are lost if they do not fit the final depth.
  std::optional<double> ramp_from_depth;       // J
  std::optional<double> ramp_from_temperature; // K
  bool truncate_energy = false;
  std::uint64_t seed = 1;

  void validate() const;
};

// Sequence for one swept value, with mixing windows and transport segments laid out.
PulseSequence build_sequence(ExperimentConfig const &cfg, double x);

struct DataPoint
{
  double x = 0.0;
  double p3_mean = 0.0;
  double p3_stderr = 0.0;
  std::uint64_t n_detected = 0;
  std::uint64_t n_initial = 0;
};

struct DataSet
{
  std::vector<DataPoint> points;
  std::uint64_t seed = 0;
  std::string metadata; // free-form key = value lines echoing the configuration

  std::vector<double> xs() const;
  std::vector<double> p3() const;
  std::vector<double> stderrs() const;
};

struct RunOptions
{
  unsigned threads = 1; // affects speed only
};

DataSet run_experiment(ExperimentConfig const &cfg, RunOptions const &options = {});

// Atom positions during a mixing window.
struct PositionTrace
{
  std::vector<double> t; // s
  std::vector<double> z; // m

  static PositionTrace stationary(double z, double t0, double t1) { return {{t0, t1}, {z, z}}; }
};

// Probability that the mixing laser scatters at least one photon along the trace.
double mixing_probability(PositionTrace const &trace, MixingLaserConfig const &cfg);

// Fully mixes the state with the scattering probability of the trace.
BlochVector mixing_collapse(BlochVector const &state, PositionTrace const &trace, MixingLaserConfig const &cfg,
                            RngStream &rng);

std::string describe(ExperimentConfig const &cfg);

void write_dataset(std::ostream &out, DataSet const &data);
DataSet read_dataset(std::istream &in);
// Writes `path` and a metadata sidecar `path` + ".meta".
void write_dataset(std::filesystem::path const &path, DataSet const &data);
DataSet read_dataset(std::filesystem::path const &path);

} // namespace conveyor

#pragma once

#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace conveyor {

// Pseudo-spin of the clock transition. w = -1 is F=4, w = +1 is F=3.
struct BlochVector
{
  double u = 0.0;
  double v = 0.0;
  double w = -1.0;

  double norm() const;
  // Population transferred to F=3.
  double p3() const { return 0.5 * (w + 1.0); }
};

enum class PulseMode
{
  instantaneous,
  finite_duration,
};

struct PulseParams
{
  double area = 0.0;                  // rad
  double rabi_frequency = 0.0;        // rad/s, required for finite_duration
  double phase = 0.0;                 // rad, rotation axis (cos phase, sin phase, 0)
  PulseMode mode = PulseMode::instantaneous;

  double duration() const;
};

PulseParams half_pi_pulse(double phase = 0.0);
PulseParams pi_pulse(double phase = 0.0);

struct Pulse
{
  PulseParams params;
};

struct FreeEvolution
{
  double duration = 0.0;
};

// Time during which the atom is moved by the conveyor. For the coherent
// evolution it behaves like free evolution; the shot simulator attaches
// heating and position to it.
struct TransportSegment
{
  double duration = 0.0;
  int leg = 0; // 0 outbound, 1 return
};

// Time during which the state-mixing laser is on. Inert in run_sequence.
struct MixingWindow
{
  double duration = 0.0;
};

using Segment = std::variant<Pulse, FreeEvolution, TransportSegment, MixingWindow>;

double segment_duration(Segment const &s);

class PulseSequence
{
public:
  PulseSequence() = default;
  explicit PulseSequence(std::vector<Segment> segments);

  PulseSequence &add(Segment s);

  std::vector<Segment> const &segments() const { return segments_; }
  double duration() const;

  // Throws ConfigError if empty or if any duration is negative or non-finite.
  void validate() const;

  // pi/2 - t - pi/2
  static PulseSequence ramsey(double t, PulseParams half = half_pi_pulse());
  // pi/2 - tau_pi - pi - (t - tau_pi) - pi/2, with t measured between the pi/2 pulses.
  static PulseSequence echo(double tau_pi, double t, PulseParams half = half_pi_pulse(), PulseParams full = pi_pulse());

private:
  std::vector<Segment> segments_;
};

// Total detuning delta + delta_ls of one atom as a function of time, defined on [0, end()].
class DetuningTimeline
{
public:
  // Constant detuning over all time.
  static DetuningTimeline constant(double detuning);
  // Piecewise constant: values[i] holds on [breaks[i], breaks[i+1]), the last value up to `end`.
  // breaks must start at 0 and be strictly increasing.
  static DetuningTimeline piecewise(std::vector<double> breaks, std::vector<double> values,
                                    double end = std::numeric_limits<double>::infinity());
  // Arbitrary function on [0, end]; phases are integrated by composite Gauss-Legendre quadrature.
  static DetuningTimeline function(std::function<double(double)> f, double end);

  double end() const { return end_; }
  bool covers(double t0, double t1) const { return t0 >= 0.0 && t1 <= end_ * (1.0 + 1e-12) && t0 <= t1; }
  double value(double t) const;
  // Accumulated precession angle over [t0, t1].
  double phase(double t0, double t1) const;

private:
  std::vector<double> breaks_;
  std::vector<double> values_;
  std::function<double(double)> fn_;
  double end_ = 0.0;
};

BlochVector apply_pulse(BlochVector const &state, PulseParams const &pulse, double detuning);

// Precession about w by angle total_detuning * duration.
BlochVector free_evolve(BlochVector const &state, double total_detuning, double duration);

// Rotation about w by a given angle.
BlochVector precess(BlochVector const &state, double angle);

// Isotropic decay toward the fully mixed state with time constant T1.
// T1 = +inf disables it.
BlochVector relax_T1(BlochVector const &state, double duration, double T1);

struct SequenceResult
{
  BlochVector final;
  double p3 = 0.0;
};

// Called after each segment with the segment, its time span and the state,
// which the hook may modify.
using SegmentHook = std::function<void(Segment const &, double t_begin, double t_end, BlochVector &)>;

// Applies the sequence in order. Finite-duration pulses consume time and see
// the timeline value at their midpoint. Throws ConfigError if the timeline
// does not cover a segment.
SequenceResult run_sequence(PulseSequence const &seq,
                            DetuningTimeline const &timeline,
                            BlochVector initial = {},
                            SegmentHook const &hook = {});

} // namespace conveyor

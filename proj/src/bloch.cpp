#include "conveyor/bloch.hpp"

#include "conveyor/errors.hpp"
#include "conveyor/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace conveyor {

double BlochVector::norm() const { return std::sqrt(u * u + v * v + w * w); }

double PulseParams::duration() const
{
  if (mode == PulseMode::instantaneous) { return 0.0; }
  return area / rabi_frequency;
}

PulseParams half_pi_pulse(double phase) { return {std::numbers::pi / 2, two_pi * 10e3, phase, PulseMode::instantaneous}; }

PulseParams pi_pulse(double phase) { return {std::numbers::pi, two_pi * 10e3, phase, PulseMode::instantaneous}; }

double segment_duration(Segment const &s)
{
  return std::visit(
    [](auto const &seg) -> double {
      using T = std::decay_t<decltype(seg)>;
      if constexpr (std::is_same_v<T, Pulse>) {
        return seg.params.duration();
      } else {
        return seg.duration;
      }
    },
    s);
}

PulseSequence::PulseSequence(std::vector<Segment> segments)
  : segments_(std::move(segments))
{
}

PulseSequence &PulseSequence::add(Segment s)
{
  segments_.push_back(std::move(s));
  return *this;
}

double PulseSequence::duration() const
{
  double total = 0.0;
  for (auto const &s : segments_) { total += segment_duration(s); }
  return total;
}

void PulseSequence::validate() const
{
  if (segments_.empty()) { throw ConfigError("pulse sequence is empty"); }
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    double const d = segment_duration(segments_[i]);
    if (!std::isfinite(d) || d < 0.0) { throw ConfigError("segment " + std::to_string(i) + " has invalid duration"); }
    if (auto const *p = std::get_if<Pulse>(&segments_[i])) {
      if (!(p->params.area >= 0.0)) { throw ConfigError("segment " + std::to_string(i) + " has negative pulse area"); }
      if (p->params.mode == PulseMode::finite_duration && !(p->params.rabi_frequency > 0.0)) {
        throw ConfigError("segment " + std::to_string(i) + " needs a positive Rabi frequency");
      }
    }
  }
}

PulseSequence PulseSequence::ramsey(double t, PulseParams half)
{
  return PulseSequence({Pulse{half}, FreeEvolution{t}, Pulse{half}});
}

PulseSequence PulseSequence::echo(double tau_pi, double t, PulseParams half, PulseParams full)
{
  return PulseSequence({Pulse{half}, FreeEvolution{tau_pi}, Pulse{full}, FreeEvolution{t - tau_pi}, Pulse{half}});
}

// ---------------------------------------------------------------------------

DetuningTimeline DetuningTimeline::constant(double detuning)
{
  return piecewise({0.0}, {detuning});
}

DetuningTimeline DetuningTimeline::piecewise(std::vector<double> breaks, std::vector<double> values, double end)
{
  if (breaks.empty() || breaks.size() != values.size() || breaks.front() != 0.0) {
    throw ConfigError("piecewise timeline needs matching breaks/values starting at 0");
  }
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    if (!(breaks[i] > breaks[i - 1])) { throw ConfigError("timeline breaks must be strictly increasing"); }
  }
  DetuningTimeline tl;
  tl.breaks_ = std::move(breaks);
  tl.values_ = std::move(values);
  tl.end_ = end;
  return tl;
}

DetuningTimeline DetuningTimeline::function(std::function<double(double)> f, double end)
{
  DetuningTimeline tl;
  tl.fn_ = std::move(f);
  tl.end_ = end;
  return tl;
}

double DetuningTimeline::value(double t) const
{
  if (fn_) { return fn_(t); }
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  std::size_t const i = it == breaks_.begin() ? 0 : static_cast<std::size_t>(it - breaks_.begin()) - 1;
  return values_[i];
}

double DetuningTimeline::phase(double t0, double t1) const
{
  if (t1 <= t0) { return 0.0; }
  if (fn_) {
    // 5-point Gauss-Legendre on panels no longer than 1/64 of the span.
    static constexpr std::array<double, 5> x{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                             0.9061798459386640};
    static constexpr std::array<double, 5> wq{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                              0.2369268850561891, 0.2369268850561891};
    int const panels = 64;
    double const h = (t1 - t0) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
      double const mid = t0 + (p + 0.5) * h;
      for (std::size_t i = 0; i < x.size(); ++i) { sum += wq[i] * fn_(mid + 0.5 * h * x[i]); }
    }
    return 0.5 * h * sum;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < breaks_.size(); ++i) {
    double const lo = std::max(t0, breaks_[i]);
    double const hi = std::min(t1, i + 1 < breaks_.size() ? breaks_[i + 1] : t1);
    if (hi > lo) { total += values_[i] * (hi - lo); }
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

// Right-handed rotation of r by angle theta about unit axis n.
BlochVector rotate(BlochVector const &r, double nx, double ny, double nz, double theta)
{
  double const c = std::cos(theta);
  double const s = std::sin(theta);
  double const dot = nx * r.u + ny * r.v + nz * r.w;
  double const cx = ny * r.w - nz * r.v;
  double const cy = nz * r.u - nx * r.w;
  double const cz = nx * r.v - ny * r.u;
  return {r.u * c + cx * s + nx * dot * (1.0 - c), r.v * c + cy * s + ny * dot * (1.0 - c),
          r.w * c + cz * s + nz * dot * (1.0 - c)};
}

} // namespace

BlochVector apply_pulse(BlochVector const &state, PulseParams const &pulse, double detuning)
{
  double const cx = std::cos(pulse.phase);
  double const sy = std::sin(pulse.phase);
  if (pulse.mode == PulseMode::instantaneous) { return rotate(state, cx, sy, 0.0, pulse.area); }
  double const omega = pulse.rabi_frequency;
  double const omega_eff = std::hypot(omega, detuning);
  double const tau = pulse.area / omega;
  return rotate(state, omega * cx / omega_eff, omega * sy / omega_eff, detuning / omega_eff, omega_eff * tau);
}

BlochVector precess(BlochVector const &state, double angle)
{
  double const c = std::cos(angle);
  double const s = std::sin(angle);
  return {state.u * c - state.v * s, state.u * s + state.v * c, state.w};
}

BlochVector free_evolve(BlochVector const &state, double total_detuning, double duration)
{
  if (duration == 0.0) { return state; }
  return precess(state, total_detuning * duration);
}

BlochVector relax_T1(BlochVector const &state, double duration, double T1)
{
  if (duration == 0.0 || std::isinf(T1)) { return state; }
  double const f = std::exp(-duration / T1);
  return {state.u * f, state.v * f, state.w * f};
}

SequenceResult run_sequence(PulseSequence const &seq, DetuningTimeline const &timeline, BlochVector initial,
                            SegmentHook const &hook)
{
  seq.validate();
  BlochVector state = initial;
  double t = 0.0;
  for (auto const &segment : seq.segments()) {
    double const d = segment_duration(segment);
    if (!timeline.covers(t, t + d)) { throw ConfigError("detuning timeline does not cover the sequence"); }
    if (auto const *p = std::get_if<Pulse>(&segment)) {
      state = apply_pulse(state, p->params, timeline.value(t + 0.5 * d));
    } else {
      state = precess(state, timeline.phase(t, t + d));
    }
    if (hook) { hook(segment, t, t + d, state); }
    t += d;
  }
  return {state, state.p3()};
}

} // namespace conveyor

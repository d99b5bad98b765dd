#include "conveyor/bloch.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/units.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace conveyor;

namespace {

constexpr double pi = std::numbers::pi;

// Direct integration of dr/dt = W x r with W = (Omega cos phi, Omega sin phi, delta).
BlochVector rk4_pulse(BlochVector r, double omega, double phase, double detuning, double duration, int steps = 20000)
{
  double const wx = omega * std::cos(phase);
  double const wy = omega * std::sin(phase);
  double const wz = detuning;
  auto f = [&](BlochVector const &s) {
    return BlochVector{wy * s.w - wz * s.v, wz * s.u - wx * s.w, wx * s.v - wy * s.u};
  };
  auto axpy = [](BlochVector const &a, double h, BlochVector const &b) {
    return BlochVector{a.u + h * b.u, a.v + h * b.v, a.w + h * b.w};
  };
  double const h = duration / steps;
  for (int i = 0; i < steps; ++i) {
    auto const k1 = f(r);
    auto const k2 = f(axpy(r, 0.5 * h, k1));
    auto const k3 = f(axpy(r, 0.5 * h, k2));
    auto const k4 = f(axpy(r, h, k3));
    r = {r.u + h / 6 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u), r.v + h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v),
         r.w + h / 6 * (k1.w + 2 * k2.w + 2 * k3.w + k4.w)};
  }
  return r;
}


} // namespace

TEST_CASE("finite pulses agree with direct integration")
{
  double const omega = two_pi * 10e3;
  for (double detuning : {0.0, two_pi * 1e3, -two_pi * 7e3, two_pi * 25e3}) {
    for (double phase : {0.0, 0.7, pi / 2, 2.5}) {
      for (double area : {pi / 2, pi, 2.2}) {
        BlochVector const start{0.3, -0.4, -std::sqrt(1 - 0.25)};
        PulseParams p{area, omega, phase, PulseMode::finite_duration};
        auto const got = apply_pulse(start, p, detuning);
        auto const ref = rk4_pulse(start, omega, phase, detuning, area / omega);
        CHECK(std::abs(got.u - ref.u) < 1e-9);
        CHECK(std::abs(got.v - ref.v) < 1e-9);
        CHECK(std::abs(got.w - ref.w) < 1e-9);
      }
    }
  }
}

TEST_CASE("instantaneous pulses are the zero-duration limit")
{
  PulseParams p{pi / 2, two_pi * 10e3, 0.3, PulseMode::instantaneous};
  auto const got = apply_pulse({}, p, two_pi * 50e3);
  auto const ref = rk4_pulse({}, 1.0, 0.3, 0.0, pi / 2);
  CHECK(std::abs(got.u - ref.u) < 1e-9);
  CHECK(std::abs(got.v - ref.v) < 1e-9);
  CHECK(std::abs(got.w - ref.w) < 1e-9);
  CHECK(p.duration() == 0.0);
}

TEST_CASE("free precession integrates the detuning")
{
  BlochVector const r{1.0, 0.0, 0.0};
  auto const got = free_evolve(r, two_pi * 1e3, 0.1e-3);
  auto const ref = rk4_pulse(r, 0.0, 0.0, two_pi * 1e3, 0.1e-3);
  CHECK(std::abs(got.u - ref.u) < 1e-10);
  CHECK(std::abs(got.v - ref.v) < 1e-10);
}

TEST_CASE("ideal Ramsey fringe is cos(delta t)")
{
  for (double delta : {0.0, two_pi * 500.0, -two_pi * 3e3}) {
    for (double t : {0.0, 0.1e-3, 0.37e-3, 2e-3}) {
      auto const res = run_sequence(PulseSequence::ramsey(t), DetuningTimeline::constant(delta));
      CHECK(res.final.w == doctest::Approx(std::cos(delta * t)).epsilon(1e-12).scale(1));
      CHECK(res.p3 == doctest::Approx(0.5 * (1 + std::cos(delta * t))).scale(1));
    }
  }
}

TEST_CASE("echo refocuses a static detuning at t = 2 tau_pi")
{
  for (double delta : {0.0, two_pi * 1e3, -two_pi * 3.1e3}) {
    auto const res = run_sequence(PulseSequence::echo(1e-3, 2e-3), DetuningTimeline::constant(delta));
    CHECK(res.final.w == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(res.p3) < 1e-12);
  }
}

TEST_CASE("echo fringe off centre follows -cos(delta (t - 2 tau_pi))")
{
  double const delta = two_pi * 2e3;
  for (double t : {1.5e-3, 1.9e-3, 2.3e-3, 3e-3}) {
    auto const res = run_sequence(PulseSequence::echo(1e-3, t), DetuningTimeline::constant(delta));
    CHECK(res.final.w == doctest::Approx(-std::cos(delta * (t - 2e-3))).scale(1).epsilon(1e-12));
  }
}

TEST_CASE("rotations preserve the norm")
{
  BlochVector r{0.1, 0.2, -std::sqrt(1 - 0.05)};
  for (int i = 0; i < 1000; ++i) {
    r = apply_pulse(r, {0.1 * i, two_pi * 1e4, 0.37 * i, i % 2 ? PulseMode::finite_duration : PulseMode::instantaneous},
                    two_pi * 300.0 * (i % 7));
    r = free_evolve(r, two_pi * 1e3, 1e-5 * i);
  }
  CHECK(r.norm() == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("T1 relaxation shrinks the vector toward the centre")
{
  BlochVector const r{0.0, 1.0, 0.0};
  auto const d = relax_T1(r, 0.5, 1.0);
  CHECK(d.v == doctest::Approx(std::exp(-0.5)));
  CHECK(relax_T1(r, 0.5, std::numeric_limits<double>::infinity()).v == 1.0);
  auto const full = relax_T1(BlochVector{}, 50.0, 1.0);
  CHECK(full.p3() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("timeline phases")
{
  auto const pw = DetuningTimeline::piecewise({0.0, 1.0, 3.0}, {2.0, -1.0, 5.0});
  CHECK(pw.phase(0.0, 4.0) == doctest::Approx(2.0 - 2.0 + 5.0));
  CHECK(pw.phase(0.5, 2.0) == doctest::Approx(1.0 - 1.0));
  CHECK(pw.value(1.0) == -1.0);
  auto const fn = DetuningTimeline::function([](double t) { return std::sin(t); }, 10.0);
  CHECK(fn.phase(0.0, pi) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fn.phase(1.0, 7.0) == doctest::Approx(std::cos(1.0) - std::cos(7.0)).epsilon(1e-12));
  CHECK(fn.covers(0.0, 10.0));
  CHECK_FALSE(fn.covers(0.0, 10.1));
}

TEST_CASE("time-dependent detuning accumulates as its integral in a Ramsey sequence")
{
  auto const tl = DetuningTimeline::function([](double t) { return two_pi * (1e3 + 4e5 * t); }, 1e-3);
  auto const res = run_sequence(PulseSequence::ramsey(1e-3), tl);
  double const phase = two_pi * (1e3 * 1e-3 + 2e5 * 1e-6);
  CHECK(res.final.w == doctest::Approx(std::cos(phase)).epsilon(1e-10));
}

TEST_CASE("hooks see every segment in order")
{
  int calls = 0;
  double last_end = 0.0;
  run_sequence(PulseSequence::echo(1e-3, 2e-3), DetuningTimeline::constant(0.0), {},
               [&](Segment const &, double t0, double t1, BlochVector &) {
                 CHECK(t0 == doctest::Approx(last_end));
                 last_end = t1;
                 ++calls;
               });
  CHECK(calls == 5);
  CHECK(last_end == doctest::Approx(2e-3));
}

TEST_CASE("invalid sequences are rejected")
{
  CHECK_THROWS_AS(PulseSequence{}.validate(), ConfigError);
  CHECK_THROWS_AS(PulseSequence::ramsey(-1.0).validate(), ConfigError);
  PulseSequence bad({Pulse{{pi, 0.0, 0.0, PulseMode::finite_duration}}});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  auto const short_tl = DetuningTimeline::function([](double) { return 0.0; }, 1e-3);
  CHECK_THROWS_AS(run_sequence(PulseSequence::ramsey(2e-3), short_tl), ConfigError);
  CHECK_THROWS_AS(DetuningTimeline::piecewise({0.0, 0.0}, {1.0, 2.0}), ConfigError);
}

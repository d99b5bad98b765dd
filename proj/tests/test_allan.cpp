#include "conveyor/allan.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/units.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace conveyor;

namespace {

NoiseRecord white_record(double sigma, std::size_t n, double period, std::uint64_t seed)
{
  NoiseRecord r;
  r.sample_period = period;
  auto rng = rng_stream(seed, 0, 0, 0);
  std::normal_distribution<double> g(1.0, sigma);
  for (std::size_t i = 0; i < n; ++i) { r.samples.push_back(g(rng)); }
  return r;
}

} // namespace

TEST_CASE("constant record has zero Allan deviation at every averaging time")
{
  NoiseRecord r{1e-3, std::vector<double>(1024, 1.0)};
  auto const curve = allan_curve(r, octave_taus(r));
  for (double s : curve.sigma_A) { CHECK(s == 0.0); }
  CHECK(curve.taus.size() == 9);
  CHECK(curve.taus.back() == doctest::Approx(0.256));
}

TEST_CASE("alternating record has the closed-form Allan variance")
{
  double const a = 0.3;
  NoiseRecord r{1e-3, {}};
  for (int i = 0; i < 2310; ++i) { r.samples.push_back(i % 2 ? -a : a); }
  for (int n : {1, 3, 5, 7, 11}) {
    CHECK(allan_variance(r, n * 1e-3) == doctest::Approx(2 * a * a / (n * n)).epsilon(1e-12));
  }
  for (int n : {2, 6, 10}) { CHECK(allan_variance(r, n * 1e-3) == doctest::Approx(0.0).scale(1e-20)); }
}

TEST_CASE("white noise Allan deviation falls as tau^-1/2")
{
  auto const r = white_record(0.01, 1 << 18, 1e-3, 42);
  double const s1 = std::sqrt(allan_variance(r, 1e-3));
  CHECK(s1 == doctest::Approx(0.01).epsilon(0.02));
  for (int n : {4, 16, 64}) {
    double const s = std::sqrt(allan_variance(r, n * 1e-3));
    CHECK(s * std::sqrt(double(n)) == doctest::Approx(s1).epsilon(0.1));
  }
}

TEST_CASE("invalid averaging requests are rejected")
{
  NoiseRecord r{1e-3, std::vector<double>(10, 1.0)};
  CHECK_THROWS_AS(allan_variance(r, 1.5e-3), ConfigError);
  CHECK_THROWS_AS(allan_variance(r, 6e-3), ConfigError);
  CHECK_THROWS_AS(allan_variance(NoiseRecord{0.0, {1.0, 1.0}}, 1.0), ValidationError);
  CHECK_THROWS_AS(allan_variance(NoiseRecord{1e-3, {1.0}}, 1e-3), ValidationError);
  CHECK_THROWS_AS((NoiseRecord{1e-3, {0.0, 0.0}}.normalized()), NumericError);
  CHECK(NoiseRecord{1e-3, {2.0, 4.0}}.normalized().samples[1] == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("synthesized records hit their target at the reference time")
{
  for (auto kind : {NoiseKind::white, NoiseKind::random_walk, NoiseKind::band_limited}) {
    auto rng = rng_stream(7, static_cast<std::uint64_t>(kind), 0, 0);
    BeatNoiseSpec const spec{kind, 0.004, 0.1};
    auto const r = synthesize_beat_record(spec, 20.0, 1e-3, rng);
    CHECK(std::sqrt(allan_variance(r, 0.1)) == doctest::Approx(0.004).epsilon(0.2));
    double mean = 0;
    for (double x : r.samples) { mean += x; }
    CHECK(mean / r.samples.size() == doctest::Approx(1.0).epsilon(0.05));
  }
  auto rng = rng_stream(1, 0, 0, 0);
  CHECK_THROWS_AS(synthesize_beat_record({NoiseKind::white, -1.0, 0.1}, 2.0, 1e-3, rng), ConfigError);
  CHECK_THROWS_AS(synthesize_beat_record({NoiseKind::white, 0.01, 0.1}, 0.5, 1e-3, rng), ConfigError);
}

TEST_CASE("Allan curve interpolates log-log and refuses to extrapolate")
{
  AllanCurve const c{{0.01, 1.0}, {0.1, 0.01}};
  CHECK(c.at(0.1) == doctest::Approx(0.1 / std::sqrt(10.0)));
  CHECK(c.at(0.01) == doctest::Approx(0.1));
  CHECK_THROWS_AS(c.at(2.0), NumericError);
  CHECK_THROWS_AS((AllanCurve{{0.1, 0.1}, {1.0, 1.0}}.validate()), ValidationError);
}

TEST_CASE("white plus floor model")
{
  auto const f = white_plus_floor(0.003, 0.1, 0.004);
  CHECK(f(0.1) == doctest::Approx(0.005));
  CHECK(f(1e4) == doctest::Approx(0.004).epsilon(1e-4));
}

TEST_CASE("echo visibility is the gaussian average over the detuning jump")
{
  VisibilityModel m;
  m.delta0 = -two_pi * 3e3;
  m.V0 = 0.9;
  m.allan = white_plus_floor(0.002, 0.1, 0.005);
  m.sigma_scale = 1.5;
  for (double tau : {2e-3, 8e-3, 20e-3}) {
    double const sigma = m.detuning_sigma(tau);
    CHECK(sigma == doctest::Approx(std::sqrt(2.0) * std::abs(m.delta0) * 1.5 * std::sqrt(0.002 * 0.002 * 0.1 / tau + 2.5e-5)));
    // Echo centre phase is the jump times tau.
    auto rng = rng_stream(11, static_cast<std::uint64_t>(tau * 1e6), 0, 0);
    int const n = 100000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      double const c = m.V0 * std::cos(sample_detuning_jump(sigma, rng) * tau);
      sum += c;
      sq += c * c;
    }
    double const mean = sum / n;
    double const se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - echo_visibility(tau, m)) < 4 * se + 1e-12);
  }
  CHECK(echo_visibility(0.0, m) == m.V0);
  m.V0 = 1.5;
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("noise record and Allan curve CSV round trip")
{
  auto const r = white_record(0.01, 100, 1e-3, 3);
  std::stringstream ss;
  write_noise_record(ss, r);
  auto const back = read_noise_record(ss);
  CHECK(back.sample_period == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(back.samples == r.samples);

  AllanCurve const c{{0.001, 0.01, 0.1}, {0.02, 0.0071, 0.0025}};
  std::stringstream sc;
  write_allan_curve(sc, c);
  auto const cb = read_allan_curve(sc);
  CHECK(cb.taus == c.taus);
  CHECK(cb.sigma_A == c.sigma_A);

  std::stringstream bad("time_s,amplitude\n0,1\n0.001,1\n0.003,1\n");
  CHECK_THROWS_AS(read_noise_record(bad), ConfigError);
  CHECK_THROWS_AS(read_noise_record(std::filesystem::path("/nonexistent/record.csv")), IoError);
}

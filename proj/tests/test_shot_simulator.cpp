#include "conveyor/dephasing.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/shot_simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

using namespace conveyor;

namespace {

ExperimentConfig ideal(double depth_mK = 0.0)
{
  ExperimentConfig cfg;
  cfg.trap.depth_U0 = depth_mK * 1e-3 * cfg.trap.constants.k_B;
  cfg.prep_efficiency = 1.0;
  cfg.transfer_survival = 1.0;
  cfg.detection = {0.0, 1.0};
  cfg.atom_count = AtomCountMode::fixed;
  cfg.atoms_per_shot = 10;
  cfg.shots_per_point = 20;
  cfg.sequence.grid = {0.0, 0.2e-3, 0.5e-3, 1e-3};
  return cfg;
}

// Expected detected fraction per initial atom for a given F=3 probability.
double detected_fraction(ExperimentConfig const &cfg, double p3)
{
  auto const &d = cfg.detection;
  double const prepared = p3 * d.p_survive_given_F3 + (1 - p3) * d.p_survive_given_F4;
  return cfg.transfer_survival * ((1 - cfg.prep_efficiency) * d.p_survive_given_F4 + cfg.prep_efficiency * prepared);
}

} // namespace

TEST_CASE("resonant limit: no trap light, no detuning, perfect fringe")
{
  auto const data = run_experiment(ideal());
  for (auto const &p : data.points) {
    CHECK(p.p3_mean == 1.0);
    CHECK(p.n_initial == 200);
    CHECK(p.p3_stderr == 0.0);
  }
}

TEST_CASE("detection discriminates the two hyperfine states")
{
  auto cfg = ideal();
  cfg.detection = {0.05, 0.9};
  cfg.sequence.detuning = two_pi * 1e3;
  cfg.sequence.grid = {0.5e-3, 1e-3};
  cfg.shots_per_point = 2000;
  auto const data = run_experiment(cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    double const expected = i == 0 ? 0.05 : 0.9; // dark fringe, then bright fringe
    auto const &p = data.points[i];
    CHECK(std::abs(p.p3_mean - expected) < 4 * std::sqrt(expected * (1 - expected) / p.n_initial));
  }
}

TEST_CASE("estimator matches the thermal ensemble average with all imperfections")
{
  auto cfg = ideal(1.0);
  cfg.trap.temperature = 50e-6;
  cfg.sequence.detuning = two_pi * 1.5e3;
  cfg.atom_count = AtomCountMode::poisson;
  cfg.atoms_per_shot = 40;
  cfg.shots_per_point = 500;
  cfg.prep_efficiency = 0.85;
  cfg.transfer_survival = 0.9;
  cfg.detection = {0.02, 0.93};
  cfg.sequence.grid = {0.05e-3, 0.3e-3, 1.1e-3, 2.5e-3};
  auto const dist = LightShiftDistribution::from(derive_trap_params(cfg.trap));
  auto const data = run_experiment(cfg);
  for (auto const &p : data.points) {
    double const p3 = 0.5 * (1 + ramsey_signal(p.x, cfg.sequence.detuning, dist, LineshapeForm::exact));
    double const expected = detected_fraction(cfg, p3);
    double const se = std::sqrt(expected * (1 - expected) / p.n_initial);
    CHECK(std::abs(p.p3_mean - expected) < 4 * se);
    CHECK(p.p3_stderr == doctest::Approx(se).epsilon(0.05));
  }
}

TEST_CASE("echo refocuses the thermal spread")
{
  auto cfg = ideal(1.0);
  cfg.sequence.kind = SequenceKind::echo;
  cfg.sequence.tau_pi = 2e-3;
  cfg.sequence.grid = {4e-3};
  auto const data = run_experiment(cfg);
  CHECK(data.points[0].p3_mean == 0.0);
}

TEST_CASE("pointing noise reduces the echo visibility as predicted")
{
  auto cfg = ideal();
  cfg.sequence.kind = SequenceKind::echo;
  cfg.sequence.sweep = SweepVariable::tau_pi;
  cfg.sequence.grid = {5e-3, 20e-3};
  cfg.shots_per_point = 4000;
  VisibilityModel m;
  m.delta0 = -two_pi * 3e3;
  m.allan = white_plus_floor(0.0, 0.1, 0.01);
  cfg.noise = m;
  auto const data = run_experiment(cfg);
  for (auto const &p : data.points) {
    double const expected = 0.5 * (1 - echo_visibility(p.x, m));
    CHECK(std::abs(p.p3_mean - expected) < 4 * std::sqrt(expected * (1 - expected) / p.n_initial) + 1e-12);
  }
}

TEST_CASE("T1 relaxation pulls the fringe to one half")
{
  auto cfg = ideal();
  cfg.t1 = 1e-3;
  cfg.shots_per_point = 2000;
  cfg.sequence.grid = {1e-3};
  auto const data = run_experiment(cfg);
  double const expected = 0.5 * (1 + std::exp(-1.0));
  CHECK(std::abs(data.points[0].p3_mean - expected) < 4 * std::sqrt(expected * (1 - expected) / 20000));
}

TEST_CASE("results do not depend on the thread count")
{
  auto cfg = ideal(1.0);
  cfg.atom_count = AtomCountMode::poisson;
  cfg.prep_efficiency = 0.8;
  cfg.detection = {0.01, 0.95};
  auto const a = run_experiment(cfg, {1});
  auto const b = run_experiment(cfg, {4});
  std::ostringstream sa, sb;
  write_dataset(sa, a);
  write_dataset(sb, b);
  CHECK(sa.str() == sb.str());
  cfg.seed = 2;
  std::ostringstream sc;
  write_dataset(sc, run_experiment(cfg, {4}));
  CHECK(sa.str() != sc.str());
}

TEST_CASE("Poisson atom number has the requested mean")
{
  auto cfg = ideal();
  cfg.atom_count = AtomCountMode::poisson;
  cfg.atoms_per_shot = 12.5;
  cfg.shots_per_point = 4000;
  cfg.sequence.grid = {0.0};
  auto const p = run_experiment(cfg).points[0];
  CHECK(std::abs(static_cast<double>(p.n_initial) - 50000.0) < 4 * std::sqrt(50000.0));
}

TEST_CASE("mixing probabilities follow the beam profile")
{
  MixingLaserConfig const laser; // 2e3 /s for 3 ms: 6 scattering events on axis
  CHECK(mixing_probability(PositionTrace::stationary(0.0, 0.0, 3e-3), laser) == doctest::Approx(1 - std::exp(-6.0)));
  CHECK(mixing_probability(PositionTrace::stationary(1e-3, 0.0, 3e-3), laser) < 1e-300);
  CHECK(mixing_probability(PositionTrace::stationary(laser.waist, 0.0, 3e-3), laser) ==
        doctest::Approx(1 - std::exp(-6.0 * std::exp(-2.0))));
  CHECK_THROWS_AS(mixing_probability(PositionTrace{{0.0}, {0.0}}, laser), ConfigError);
}

TEST_CASE("mixing at the loading position destroys the echo, after transport it does not")
{
  auto cfg = ideal(0.1);
  cfg.trap.temperature = 5e-6;
  cfg.sequence.kind = SequenceKind::echo;
  cfg.sequence.tau_pi = 10e-3;
  cfg.sequence.grid = {20e-3};
  cfg.shots_per_point = 500;
  cfg.mixing = MixingLaserConfig{};
  double const p_mix = 1 - std::exp(-6.0);
  auto const p = run_experiment(cfg).points[0];
  double const expected = 0.5 * p_mix; // collapsed atoms land in F=3 half the time
  CHECK(std::abs(p.p3_mean - expected) < 4 * std::sqrt(expected * (1 - expected) / p.n_initial));

  cfg.sequence.kind = SequenceKind::transport_echo;
  cfg.transport = TransportConfig{};
  cfg.shots_per_point = 100;
  auto const q = run_experiment(cfg).points[0];
  CHECK(q.p3_mean < 0.1);
}

TEST_CASE("configuration errors name the field")
{
  auto cfg = ideal();
  auto field_of = [](ExperimentConfig const &c) {
    try {
      c.validate();
    } catch (ValidationError const &e) {
      return e.field();
    }
    return std::string{};
  };
  cfg.prep_efficiency = 1.2;
  CHECK(field_of(cfg) == "experiment.prep_efficiency");
  cfg = ideal();
  cfg.sequence.grid = {1e-3, 0.5e-3};
  CHECK(field_of(cfg) == "sequence.grid");
  cfg = ideal();
  cfg.detection = {0.9, 0.1};
  CHECK(field_of(cfg) == "detection");
  cfg = ideal();
  cfg.sequence.kind = SequenceKind::transport_echo;
  CHECK(field_of(cfg) == "transport");
  cfg = ideal();
  cfg.sequence.sweep = SweepVariable::tau_pi;
  CHECK(field_of(cfg) == "sequence.sweep");
  cfg = ideal();
  cfg.ramp_from_depth = 1e-26;
  CHECK(field_of(cfg) == "ramp.from_temperature");
  cfg = ideal();
  cfg.sequence.kind = SequenceKind::echo;
  cfg.sequence.tau_pi = 2e-3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError); // pi pulse after the second pi/2
}

TEST_CASE("datasets round-trip through CSV with a metadata sidecar")
{
  auto cfg = ideal(1.0);
  auto const data = run_experiment(cfg);
  CHECK(data.metadata.find("seed") != std::string::npos);
  auto const dir = std::filesystem::temp_directory_path() / "conveyor_test_dataset";
  std::filesystem::create_directories(dir);
  write_dataset(dir / "d.csv", data);
  CHECK(std::filesystem::exists(dir / "d.csv.meta"));
  auto const back = read_dataset(dir / "d.csv");
  REQUIRE(back.points.size() == data.points.size());
  for (std::size_t i = 0; i < back.points.size(); ++i) {
    CHECK(back.points[i].x == data.points[i].x);
    CHECK(back.points[i].p3_mean == data.points[i].p3_mean);
    CHECK(back.points[i].n_initial == data.points[i].n_initial);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_dataset(dir / "missing.csv"), IoError);
}

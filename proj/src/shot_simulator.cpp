#include "conveyor/shot_simulator.hpp"

#include "conveyor/csv.hpp"
#include "conveyor/dephasing.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <tuple>

namespace conveyor {

namespace {

void check_probability(double p, char const *field)
{
  if (!(p >= 0.0 && p <= 1.0)) { throw ValidationError(field, "must lie in [0, 1]"); }
}

} // namespace

void DetectionModel::validate() const
{
  check_probability(p_survive_given_F4, "detection.p_survive_f4");
  check_probability(p_survive_given_F3, "detection.p_survive_f3");
  if (!(p_survive_given_F3 > p_survive_given_F4)) {
    throw ValidationError("detection", "F=3 survival must exceed F=4 survival");
  }
}

void MixingLaserConfig::validate() const
{
  if (!(scattering_rate_peak >= 0.0)) { throw ValidationError("mixing.rate", "must be non-negative"); }
  if (!(waist > 0.0)) { throw ValidationError("mixing.waist", "must be positive"); }
  if (!(window_duration >= 0.0)) { throw ValidationError("mixing.window", "must be non-negative"); }
}

void TransportConfig::validate() const
{
  if (!(distance >= 0.0)) { throw ValidationError("transport.distance", "must be non-negative"); }
  if (!(leg_duration > 0.0)) { throw ValidationError("transport.duration", "must be positive"); }
  if (!(hold >= 0.0)) { throw ValidationError("transport.hold", "must be non-negative"); }
}

AccelProfile TransportConfig::leg_profile() const
{
  return make_accel_profile(distance, leg_duration, ProfileKind::bang_bang_one_way);
}

std::pair<double, double> SequenceTemplate::timing(double x) const
{
  if (sweep == SweepVariable::tau_pi) { return {x, 2.0 * x + echo_offset}; }
  return {tau_pi, x};
}

void ExperimentConfig::validate() const
{
  trap.validate();
  if (sequence.grid.empty()) { throw ValidationError("sequence.grid", "must not be empty"); }
  for (std::size_t i = 0; i < sequence.grid.size(); ++i) {
    if (!std::isfinite(sequence.grid[i]) || sequence.grid[i] < 0.0) {
      throw ValidationError("sequence.grid", "values must be finite and non-negative");
    }
    if (i > 0 && !(sequence.grid[i] > sequence.grid[i - 1])) {
      throw ValidationError("sequence.grid", "must be strictly increasing");
    }
  }
  if (sequence.kind == SequenceKind::ramsey && sequence.sweep == SweepVariable::tau_pi) {
    throw ValidationError("sequence.sweep", "a Ramsey sequence has no pi pulse to sweep");
  }
  if (shots_per_point < 1) { throw ValidationError("experiment.shots", "must be at least 1"); }
  if (!(atoms_per_shot >= 1.0)) { throw ValidationError("experiment.atoms", "must be at least 1"); }
  check_probability(prep_efficiency, "experiment.prep_efficiency");
  check_probability(transfer_survival, "experiment.transfer_survival");
  detection.validate();
  if (noise) { noise->validate(); }
  if (mixing) { mixing->validate(); }
  if (transport) { transport->validate(); }
  if (sequence.kind == SequenceKind::transport_echo) {
    if (!transport) { throw ValidationError("transport", "required by a transport echo sequence"); }
    if (mixing && mixing->window_duration > transport->hold) {
      throw ValidationError("mixing.window", "must fit inside the transport hold");
    }
  }
  if (t1 && !(*t1 > 0.0)) { throw ValidationError("experiment.t1", "must be positive"); }
  if (ramp_from_depth) {
    if (!(*ramp_from_depth > 0.0)) { throw ValidationError("ramp.from_depth", "must be positive"); }
    if (!ramp_from_temperature || !(*ramp_from_temperature > 0.0)) {
      throw ValidationError("ramp.from_temperature", "required and positive when ramping");
    }
  }
  for (double x : sequence.grid) { build_sequence(*this, x).validate(); }
}

PulseSequence build_sequence(ExperimentConfig const &cfg, double x)
{
  auto const &seq = cfg.sequence;
  auto const [tau, t] = seq.timing(x);
  auto free = [&](double d) -> Segment {
    if (d < -1e-15) {
      std::ostringstream msg;
      msg << "sequence timing infeasible at x = " << x << " s";
      throw ConfigError(msg.str());
    }
    return FreeEvolution{std::max(0.0, d)};
  };

  PulseSequence out;
  out.add(Pulse{seq.half});
  switch (seq.kind) {
  case SequenceKind::ramsey: out.add(free(t)); break;
  case SequenceKind::echo: {
    double const w = cfg.mixing ? cfg.mixing->window_duration : 0.0;
    if (w > 0.0) {
      out.add(free(tau - 0.5 * w)).add(MixingWindow{0.5 * w}).add(Pulse{seq.full}).add(MixingWindow{0.5 * w});
      out.add(free(t - tau - 0.5 * w));
    } else {
      out.add(free(tau)).add(Pulse{seq.full}).add(free(t - tau));
    }
    break;
  }
  case SequenceKind::transport_echo: {
    auto const &tr = *cfg.transport;
    double const w = cfg.mixing ? cfg.mixing->window_duration : 0.0;
    double const wait = 0.5 * (tr.hold - w);
    double const before = tau - tr.leg_duration - 0.5 * tr.hold;
    double const after = t - tau - tr.leg_duration - 0.5 * tr.hold;
    out.add(free(before)).add(TransportSegment{tr.leg_duration, 0});
    if (wait > 0.0) { out.add(free(wait)); }
    if (w > 0.0) { out.add(MixingWindow{0.5 * w}); }
    out.add(Pulse{seq.full});
    if (w > 0.0) { out.add(MixingWindow{0.5 * w}); }
    if (wait > 0.0) { out.add(free(wait)); }
    out.add(TransportSegment{tr.leg_duration, 1}).add(free(after));
    break;
  }
  }
  out.add(Pulse{seq.half});
  return out;
}

double mixing_probability(PositionTrace const &trace, MixingLaserConfig const &cfg)
{
  if (trace.t.size() != trace.z.size() || trace.t.size() < 2) {
    throw ConfigError("position trace needs at least two samples");
  }
  auto rate = [&](double z) {
    double const d = z - cfg.center_position;
    return cfg.scattering_rate_peak * std::exp(-2.0 * d * d / (cfg.waist * cfg.waist));
  };
  double integral = 0.0;
  for (std::size_t i = 1; i < trace.t.size(); ++i) {
    integral += 0.5 * (rate(trace.z[i]) + rate(trace.z[i - 1])) * (trace.t[i] - trace.t[i - 1]);
  }
  return -std::expm1(-integral);
}

BlochVector mixing_collapse(BlochVector const &state, PositionTrace const &trace, MixingLaserConfig const &cfg,
                            RngStream &rng)
{
  double const p = mixing_probability(trace, cfg);
  if (rng.uniform() < p) { return {0.0, 0.0, 0.0}; }
  return state;
}

// ---------------------------------------------------------------------------

namespace {

struct SequenceEvents
{
  double pi_time = -1.0;
  std::vector<double> transport_mid;  // one per leg
  std::vector<double> transport_end;
};

SequenceEvents scan_events(PulseSequence const &seq)
{
  SequenceEvents ev;
  double t = 0.0;
  int pulses = 0;
  for (auto const &s : seq.segments()) {
    double const d = segment_duration(s);
    if (std::holds_alternative<Pulse>(s) && ++pulses == 2) { ev.pi_time = t + 0.5 * d; }
    if (std::holds_alternative<TransportSegment>(s)) {
      ev.transport_mid.push_back(t + 0.5 * d);
      ev.transport_end.push_back(t + d);
    }
    t += d;
  }
  if (pulses < 3) { ev.pi_time = -1.0; }
  return ev;
}

// Heating tables are expensive; runs with identical transport share one.
std::shared_ptr<HeatingTable const> heating_table_for(TrapConfig const &trap, TransportConfig const &tr,
                                                      unsigned threads)
{
  using Key = std::tuple<double, double, double, double, double>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<HeatingTable const>> cache;
  Key const key{trap.depth_U0, trap.wavelength, trap.constants.atom_mass, tr.distance, tr.leg_duration};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) { return it->second; }
  auto table = std::make_shared<HeatingTable const>(HeatingTable::build(tr.leg_profile(), trap, 25, 32, 200.0, threads));
  cache.emplace(key, table);
  return table;
}

struct ShotCounts
{
  std::uint64_t detected = 0;
  std::uint64_t initial = 0;
};

} // namespace

DataSet run_experiment(ExperimentConfig const &cfg, RunOptions const &options)
{
  cfg.validate();
  auto const params = derive_trap_params(cfg.trap);
  auto const ensemble = EnsembleSpec::from(cfg.trap, cfg.truncate_energy);
  std::optional<EnsembleSpec> loading;
  if (cfg.ramp_from_depth) {
    loading = EnsembleSpec{*cfg.ramp_from_temperature, cfg.trap.constants.k_B, std::nullopt};
  }
  std::shared_ptr<HeatingTable const> heating;
  bool const transported = cfg.sequence.kind == SequenceKind::transport_echo && cfg.transport->distance > 0.0;
  if (transported) { heating = heating_table_for(cfg.trap, *cfg.transport, options.threads); }

  std::size_t const n_points = cfg.sequence.grid.size();
  std::size_t const n_shots = cfg.shots_per_point;
  std::vector<PulseSequence> sequences;
  std::vector<SequenceEvents> events;
  for (double x : cfg.sequence.grid) {
    sequences.push_back(build_sequence(cfg, x));
    events.push_back(scan_events(sequences.back()));
  }

  std::vector<ShotCounts> counts(n_points * n_shots);
  parallel_for(counts.size(), options.threads, [&](std::size_t job) {
    std::size_t const p = job / n_shots;
    std::size_t const s = job % n_shots;
    auto const &seq = sequences[p];
    auto const &ev = events[p];
    double const x = cfg.sequence.grid[p];
    double const tau = cfg.sequence.timing(x).first;

    auto shot_rng = rng_stream(cfg.seed, p, s, shot_level_index);
    std::uint64_t n_atoms = static_cast<std::uint64_t>(std::llround(cfg.atoms_per_shot));
    if (cfg.atom_count == AtomCountMode::poisson) {
      std::poisson_distribution<std::uint64_t> poisson(cfg.atoms_per_shot);
      n_atoms = poisson(shot_rng);
    }
    double jump = 0.0;
    if (cfg.noise && ev.pi_time >= 0.0) { jump = sample_detuning_jump(cfg.noise->detuning_sigma(tau), shot_rng); }

    ShotCounts shot{0, n_atoms};
    for (std::uint64_t a = 0; a < n_atoms; ++a) {
      auto rng = rng_stream(cfg.seed, p, s, a);
      if (rng.uniform() >= cfg.transfer_survival) { continue; }
      if (loading) {
        double const e_load = sample_energy(*loading, rng);
        if (adiabatic_ramp(e_load, *cfg.ramp_from_depth, cfg.trap.depth_U0).lost) { continue; }
      }
      if (rng.uniform() >= cfg.prep_efficiency) {
        // Unpumped spectator in F=4: removed by the push-out unless it slips through.
        if (rng.uniform() < cfg.detection.p_survive_given_F4) { ++shot.detected; }
        continue;
      }

      double energy = sample_energy(ensemble, rng);
      std::vector<double> breaks{0.0};
      std::vector<double> values{cfg.sequence.detuning + mean_lightshift(energy, params)};
      bool lost = false;
      std::vector<std::pair<double, int>> marks; // time, kind (0 = leg 0, 1 = leg 1, 2 = pi)
      for (std::size_t leg = 0; leg < ev.transport_mid.size(); ++leg) {
        marks.emplace_back(ev.transport_mid[leg], static_cast<int>(leg));
      }
      if (ev.pi_time >= 0.0 && jump != 0.0) { marks.emplace_back(ev.pi_time, 2); }
      std::sort(marks.begin(), marks.end());
      double offset = 0.0;
      for (auto const &[time, kind] : marks) {
        if (kind == 2) {
          offset = jump;
        } else if (heating) {
          auto const next = heating->apply(energy, rng);
          if (!next) {
            lost = true;
            break;
          }
          energy = *next;
        }
        double const value = cfg.sequence.detuning + mean_lightshift(energy, params) + offset;
        if (time <= breaks.back()) {
          values.back() = value;
        } else {
          breaks.push_back(time);
          values.push_back(value);
        }
      }
      if (lost) { continue; }

      auto const timeline = DetuningTimeline::piecewise(std::move(breaks), std::move(values));
      SegmentHook hook;
      if (cfg.mixing) {
        hook = [&](Segment const &segment, double t0, double t1, BlochVector &state) {
          if (!std::holds_alternative<MixingWindow>(segment)) { return; }
          double z = 0.0;
          if (transported && !ev.transport_end.empty() && t0 >= ev.transport_end.front() - 1e-15 &&
              (ev.transport_mid.size() < 2 || t1 <= ev.transport_mid[1])) {
            z = cfg.transport->distance;
          }
          state = mixing_collapse(state, PositionTrace::stationary(z, t0, t1), *cfg.mixing, rng);
        };
      }
      auto result = run_sequence(seq, timeline, BlochVector{}, hook);
      if (cfg.t1) { result.final = relax_T1(result.final, seq.duration(), *cfg.t1); }
      bool const in_f3 = rng.uniform() < result.final.p3();
      double const survive = in_f3 ? cfg.detection.p_survive_given_F3 : cfg.detection.p_survive_given_F4;
      if (rng.uniform() < survive) { ++shot.detected; }
    }
    counts[job] = shot;
  });

  DataSet data;
  data.seed = cfg.seed;
  data.metadata = describe(cfg);
  for (std::size_t p = 0; p < n_points; ++p) {
    DataPoint point;
    point.x = cfg.sequence.grid[p];
    for (std::size_t s = 0; s < n_shots; ++s) {
      point.n_detected += counts[p * n_shots + s].detected;
      point.n_initial += counts[p * n_shots + s].initial;
    }
    if (point.n_initial > 0) {
      double const n = static_cast<double>(point.n_initial);
      point.p3_mean = static_cast<double>(point.n_detected) / n;
      point.p3_stderr = std::sqrt(point.p3_mean * (1.0 - point.p3_mean) / n);
    }
    data.points.push_back(point);
  }
  return data;
}

std::vector<double> DataSet::xs() const
{
  std::vector<double> out;
  for (auto const &p : points) { out.push_back(p.x); }
  return out;
}

std::vector<double> DataSet::p3() const
{
  std::vector<double> out;
  for (auto const &p : points) { out.push_back(p.p3_mean); }
  return out;
}

std::vector<double> DataSet::stderrs() const
{
  std::vector<double> out;
  for (auto const &p : points) { out.push_back(p.p3_stderr); }
  return out;
}

std::string describe(ExperimentConfig const &cfg)
{
  std::ostringstream out;
  auto kv = [&](char const *k, auto const &v) { out << k << " = " << v << '\n'; };
  auto num = [](double v) { return csv::format(v); };
  kv("trap.depth_J", num(cfg.trap.depth_U0));
  kv("trap.wavelength_m", num(cfg.trap.wavelength));
  kv("trap.detuning_rad_s", num(cfg.trap.effective_detuning));
  kv("trap.temperature_K", num(cfg.trap.temperature));
  kv("sequence.kind", static_cast<int>(cfg.sequence.kind));
  kv("sequence.sweep", static_cast<int>(cfg.sequence.sweep));
  kv("sequence.tau_pi_s", num(cfg.sequence.tau_pi));
  kv("sequence.echo_offset_s", num(cfg.sequence.echo_offset));
  kv("sequence.detuning_rad_s", num(cfg.sequence.detuning));
  kv("sequence.points", cfg.sequence.grid.size());
  kv("experiment.shots", cfg.shots_per_point);
  kv("experiment.atoms", num(cfg.atoms_per_shot));
  kv("experiment.atom_count", cfg.atom_count == AtomCountMode::poisson ? "poisson" : "fixed");
  kv("experiment.prep_efficiency", num(cfg.prep_efficiency));
  kv("experiment.transfer_survival", num(cfg.transfer_survival));
  kv("detection.p_survive_f4", num(cfg.detection.p_survive_given_F4));
  kv("detection.p_survive_f3", num(cfg.detection.p_survive_given_F3));
  if (cfg.noise) { kv("noise.scale", num(cfg.noise->sigma_scale)); }
  if (cfg.transport) {
    kv("transport.distance_m", num(cfg.transport->distance));
    kv("transport.leg_duration_s", num(cfg.transport->leg_duration));
    kv("transport.hold_s", num(cfg.transport->hold));
  }
  if (cfg.mixing) {
    kv("mixing.rate_1_s", num(cfg.mixing->scattering_rate_peak));
    kv("mixing.waist_m", num(cfg.mixing->waist));
    kv("mixing.window_s", num(cfg.mixing->window_duration));
  }
  if (cfg.t1) { kv("experiment.t1_s", num(*cfg.t1)); }
  if (cfg.ramp_from_depth) {
    kv("ramp.from_depth_J", num(*cfg.ramp_from_depth));
    kv("ramp.from_temperature_K", num(*cfg.ramp_from_temperature));
  }
  kv("seed", cfg.seed);
  return out.str();
}

void write_dataset(std::ostream &out, DataSet const &data)
{
  out << "x_s,p3_mean,p3_stderr,n_detected,n_initial\n";
  for (auto const &p : data.points) {
    out << csv::format(p.x) << ',' << csv::format(p.p3_mean) << ',' << csv::format(p.p3_stderr) << ',' << p.n_detected
        << ',' << p.n_initial << '\n';
  }
}

DataSet read_dataset(std::istream &in)
{
  auto const table = csv::read(in);
  auto const cx = table.column("x_s");
  auto const cm = table.column("p3_mean");
  auto const ce = table.column("p3_stderr");
  auto const cd = table.column("n_detected");
  auto const ci = table.column("n_initial");
  DataSet data;
  for (auto const &row : table.rows) {
    data.points.push_back({row[cx], row[cm], row[ce], static_cast<std::uint64_t>(row[cd]),
                           static_cast<std::uint64_t>(row[ci])});
  }
  return data;
}

void write_dataset(std::filesystem::path const &path, DataSet const &data)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) { throw IoError("cannot write " + path.string()); }
  write_dataset(out, data);
  std::ofstream meta(path.string() + ".meta", std::ios::binary);
  if (!meta) { throw IoError("cannot write " + path.string() + ".meta"); }
  meta << data.metadata;
  if (!out || !meta) { throw IoError("write failed for " + path.string()); }
}

DataSet read_dataset(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open " + path.string()); }
  return read_dataset(in);
}

} // namespace conveyor

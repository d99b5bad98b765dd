#include "conveyor/allan.hpp"
#include "conveyor/csv.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/fit.hpp"
#include "conveyor/parallel.hpp"
#include "conveyor/pipeline.hpp"
#include "conveyor/plot.hpp"
#include "conveyor/scenario.hpp"
#include "conveyor/transport.hpp"
#include "conveyor/units.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace conveyor;
namespace fs = std::filesystem;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_io = 4;

fs::path output_dir(std::string const &flag)
{
  if (!flag.empty()) { return flag; }
  if (char const *env = std::getenv("CONVEYOR_OUT_DIR"); env && *env) { return env; }
  return ".";
}

void ensure_dir(fs::path const &dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) { throw IoError("cannot create output directory " + dir.string()); }
}

std::ofstream open_out(fs::path const &p)
{
  std::ofstream f(p, std::ios::binary);
  if (!f) { throw IoError("cannot write " + p.string()); }
  return f;
}

std::ifstream open_in(fs::path const &p)
{
  std::ifstream f(p);
  if (!f) { throw IoError("cannot open " + p.string()); }
  return f;
}

std::string first_line(fs::path const &p)
{
  auto in = open_in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') { return line; }
  }
  return line;
}

std::string summary(FitResult const &fit)
{
  std::ostringstream out;
  out << fit.model;
  if (fit.degenerate) { return out.str() + ": degenerate data, " + fit.message; }
  for (auto const &p : fit.parameters) { out << ' ' << p.name << '=' << p.value << "+-" << p.error; }
  out << (fit.converged ? " converged" : " NOT CONVERGED");
  return out.str();
}

struct Common
{
  std::string out;
  unsigned threads = default_threads();
};

void add_common(CLI::App *cmd, Common &c)
{
  cmd->add_option("--out", c.out, "output directory (default $CONVEYOR_OUT_DIR or .)");
  cmd->add_option("--threads", c.threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
}

// ---------------------------------------------------------------------------

struct SimulateArgs
{
  std::string scenario;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> runs;
};

int cmd_simulate(SimulateArgs const &a, Common const &c)
{
  Scenario s;
  if (!a.scenario.empty() == !a.preset.empty()) { throw ConfigError("give exactly one of --scenario or --preset"); }
  s = a.scenario.empty() ? load_preset(a.preset) : load_scenario(a.scenario);
  if (a.seed) {
    for (auto &r : s.runs) { r.experiment.seed = *a.seed; }
  }
  if (!a.runs.empty()) {
    std::erase_if(s.runs, [&](RunSpec const &r) { return std::find(a.runs.begin(), a.runs.end(), r.name) == a.runs.end(); });
    if (s.runs.size() != a.runs.size()) { throw ConfigError("unknown run name in --run"); }
  }
  s.validate();
  auto const dir = output_dir(c.out);
  ensure_dir(dir);
  bool all_converged = true;
  for (auto const &run : s.runs) {
    auto const outcome = execute_run(s, run, RunOptions{c.threads});
    auto const files = write_outcome(outcome, dir);
    std::cout << outcome.stem() << ": " << outcome.data.points.size() << " points -> " << files.front().string() << '\n';
    if (outcome.fit) {
      std::cout << "  " << summary(*outcome.fit) << '\n';
      all_converged = all_converged && (outcome.fit->converged || outcome.fit->degenerate);
    }
  }
  {
    auto f = open_out(dir / (s.name + ".scenario"));
    f << serialize_scenario(s);
  }
  return all_converged ? 0 : exit_numeric;
}

// ---------------------------------------------------------------------------

struct FitArgs
{
  std::string data;
  std::string model = "ramsey";
  std::string form = "rounded";
  std::string tau_pi;
  double achievable = 1.0;
  std::string output;
};

int cmd_fit(FitArgs const &a, Common const &c)
{
  auto const form = a.form == "exact" ? LineshapeForm::exact : LineshapeForm::rounded;
  FitResult fit;
  if (a.model == "visibility") {
    auto in = open_in(a.data);
    fit = fit_visibility_decay(read_visibility(in), VisibilityModelKind::gaussian_sigma);
  } else {
    auto const data = read_dataset(fs::path(a.data));
    if (a.model == "ramsey") {
      fit = fit_ramsey(data, form);
    } else {
      if (a.tau_pi.empty()) { throw ConfigError("--tau-pi is required for echo fits"); }
      fit = fit_echo(data, parse_quantity(a.tau_pi, Dimension::time), form, a.achievable);
    }
  }
  fs::path out = a.output;
  if (out.empty()) {
    auto const dir = output_dir(c.out);
    ensure_dir(dir);
    out = dir / (fs::path(a.data).stem().string() + "_fit.json");
  }
  {
    auto f = open_out(out);
    write_fit_result(f, fit);
  }
  std::cout << summary(fit) << '\n';
  if (fit.degenerate) {
    std::cerr << "fit: degenerate input (" << fit.message << ")\n";
    return exit_numeric;
  }
  if (!fit.converged) {
    std::cerr << "fit: " << fit.message << '\n';
    return exit_numeric;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct AllanArgs
{
  std::string record;
  std::vector<std::string> taus;
  std::string output;
};

int cmd_allan(AllanArgs const &a, Common const &c)
{
  auto const record = read_noise_record(fs::path(a.record));
  std::vector<double> taus;
  for (auto const &t : a.taus) { taus.push_back(parse_quantity(t, Dimension::time)); }
  if (taus.empty()) { taus = octave_taus(record); }
  auto const curve = allan_curve(record, taus);
  fs::path out = a.output;
  if (out.empty()) {
    auto const dir = output_dir(c.out);
    ensure_dir(dir);
    out = dir / (fs::path(a.record).stem().string() + "_allan.csv");
  }
  auto f = open_out(out);
  write_allan_curve(f, curve);
  std::cout << curve.taus.size() << " Allan points -> " << out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TransportArgs
{
  std::string distance = "1 mm";
  std::string duration = "2 ms";
  std::string hold = "3 ms";
  std::string depth = "0.1 mK";
  std::string wavelength = "1064 nm";
  double energy = 0.3;
  std::size_t phases = 64;
  std::string profile = "round_trip";
};

int cmd_transport(TransportArgs const &a, Common const &c)
{
  TrapConfig trap;
  trap.depth_U0 = parse_quantity(a.depth, Dimension::energy, trap.constants);
  trap.wavelength = parse_quantity(a.wavelength, Dimension::length);
  trap.validate();
  if (!(trap.depth_U0 > 0.0)) { throw ValidationError("--depth", "must be positive"); }
  if (!(a.energy >= 0.0 && a.energy < 1.0)) { throw ValidationError("--energy", "must lie in [0, 1) U0"); }
  if (a.phases < 32) { throw ValidationError("--phases", "at least 32 phases are needed"); }
  auto const kind = a.profile == "one_way" ? ProfileKind::bang_bang_one_way : ProfileKind::round_trip;
  auto const profile = make_accel_profile(parse_quantity(a.distance, Dimension::length),
                                          parse_quantity(a.duration, Dimension::time), kind,
                                          parse_quantity(a.hold, Dimension::time));
  double const dt = axial_period(trap) / default_steps_per_period;
  double const E0 = a.energy * trap.depth_U0;

  auto const worst = worst_case_heating(E0, a.phases, profile, trap, dt);
  auto const scan = heating_stats(E0, a.phases, profile, trap, dt, c.threads);
  double const U0 = trap.depth_U0;
  std::printf("profile: %zu jumps, peak acceleration %.4g m/s^2, duration %.4g s\n", profile.jump_times().size(),
              profile.peak_acceleration(), profile.duration());
  std::printf("worst-case max dE/U0 = %.4f  (per jump:", worst.gain / U0);
  for (double g : worst.jump_gains) { std::printf(" %.4f", g / U0); }
  std::printf(")\n");
  std::printf("phase-scan max dE/U0 = %.4f, mean = %.4f, escaped %zu/%zu\n", scan.max_gain / U0, scan.mean_gain / U0,
              scan.escaped_count, scan.gains.size());

  auto const dir = output_dir(c.out);
  ensure_dir(dir);
  {
    auto f = open_out(dir / "transport_heating.csv");
    f << "phase_index,dE_over_U0,escaped\n";
    for (std::size_t i = 0; i < scan.gains.size(); ++i) {
      f << i << ',' << csv::format(scan.gains[i] / U0) << ',' << (scan.escaped[i] ? 1 : 0) << '\n';
    }
  }
  auto const states = orbit_states(E0, a.phases, trap, dt);
  auto const hottest = static_cast<std::size_t>(std::max_element(scan.gains.begin(), scan.gains.end()) - scan.gains.begin());
  auto const traj = integrate_trajectory(states[hottest], profile, trap, dt, 5);
  {
    auto f = open_out(dir / "transport_trajectory.csv");
    write_trajectory(f, traj.trajectory);
  }
  std::cout << "trajectory of the hottest phase -> " << (dir / "transport_trajectory.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct PlotArgs
{
  std::string data;
  std::string fit;
  std::string title;
  std::string output;
};

int cmd_plot(PlotArgs const &a, Common const &c)
{
  std::optional<FitResult> fit;
  if (!a.fit.empty()) {
    auto in = open_in(a.fit);
    fit = read_fit_result(in);
  }
  auto const title = a.title.empty() ? fs::path(a.data).stem().string() : a.title;
  PlotSpec spec;
  if (first_line(a.data).rfind("tau_pi_s", 0) == 0) {
    auto in = open_in(a.data);
    spec = visibility_plot(read_visibility(in), fit, std::nullopt, title);
  } else {
    spec = dataset_plot(read_dataset(fs::path(a.data)), fit, title);
  }
  fs::path out = a.output;
  if (out.empty()) {
    auto const dir = output_dir(c.out);
    ensure_dir(dir);
    out = dir / (fs::path(a.data).stem().string() + ".svg");
  }
  auto f = open_out(out);
  f << render_svg(spec);
  if (!f) { throw IoError("write failed for " + out.string()); }
  std::cout << "plot -> " << out.string() << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Coherence and transport simulator for atoms in a standing-wave dipole trap"};
  app.require_subcommand(1);
  Common common;

  SimulateArgs sim;
  auto *simulate = app.add_subcommand("simulate", "run a scenario and write data, fits and plots");
  simulate->add_option("--scenario", sim.scenario, "scenario file");
  simulate->add_option("--preset", sim.preset, "built-in preset name");
  simulate->add_option("--seed", sim.seed, "override the seed of every run");
  simulate->add_option("--run", sim.runs, "only these runs");
  add_common(simulate, common);

  FitArgs fa;
  auto *fit = app.add_subcommand("fit", "fit a data CSV");
  fit->add_option("data", fa.data, "DataSet or visibility CSV")->required();
  fit->add_option("--model", fa.model)->check(CLI::IsMember({"ramsey", "echo", "visibility"}));
  fit->add_option("--form", fa.form)->check(CLI::IsMember({"rounded", "exact"}));
  fit->add_option("--tau-pi", fa.tau_pi, "pi-pulse time of an echo scan, e.g. '4 ms'");
  fit->add_option("--achievable", fa.achievable, "largest attainable P3, normalizes the echo visibility");
  fit->add_option("-o,--output", fa.output, "result file (default <out>/<data>_fit.json)");
  add_common(fit, common);

  AllanArgs aa;
  auto *allan = app.add_subcommand("allan", "Allan deviation of a beat-amplitude record");
  allan->add_option("record", aa.record, "CSV time_s,amplitude")->required();
  allan->add_option("--tau", aa.taus, "averaging times, e.g. '10 ms' (default: octaves)");
  allan->add_option("-o,--output", aa.output);
  add_common(allan, common);

  TransportArgs ta;
  auto *transport = app.add_subcommand("transport", "heating from a bang-bang transport profile");
  transport->add_option("--distance", ta.distance, "one-way distance")->capture_default_str();
  transport->add_option("--duration", ta.duration, "duration of one leg")->capture_default_str();
  transport->add_option("--hold", ta.hold, "pause at the far end")->capture_default_str();
  transport->add_option("--depth", ta.depth, "trap depth U0")->capture_default_str();
  transport->add_option("--wavelength", ta.wavelength)->capture_default_str();
  transport->add_option("--energy", ta.energy, "initial energy in units of U0")->capture_default_str();
  transport->add_option("--phases", ta.phases, "initial phases sampled")->capture_default_str();
  transport->add_option("--profile", ta.profile)->check(CLI::IsMember({"round_trip", "one_way"}))->capture_default_str();
  add_common(transport, common);

  PlotArgs pa;
  auto *plot = app.add_subcommand("plot", "render a data CSV and optional fit as SVG");
  plot->add_option("data", pa.data)->required();
  plot->add_option("--fit", pa.fit, "fit result JSON");
  plot->add_option("--title", pa.title);
  plot->add_option("-o,--output", pa.output);
  add_common(plot, common);

  auto *presets = app.add_subcommand("presets", "built-in figure presets");
  presets->require_subcommand(1);
  presets->add_subcommand("list", "list presets");
  std::string show_name;
  auto *show = presets->add_subcommand("show", "print a preset scenario");
  show->add_option("name", show_name)->required();

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (*simulate) { return cmd_simulate(sim, common); }
    if (*fit) { return cmd_fit(fa, common); }
    if (*allan) { return cmd_allan(aa, common); }
    if (*transport) { return cmd_transport(ta, common); }
    if (*plot) { return cmd_plot(pa, common); }
    if (*show) {
      std::cout << preset_text(show_name);
      return 0;
    }
    for (auto const &p : preset_list()) { std::cout << p.name << "  " << p.summary << '\n'; }
    return 0;
  } catch (ConfigError const &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (NumericError const &e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return exit_numeric;
  } catch (IoError const &e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return exit_io;
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

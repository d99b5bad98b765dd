#include "conveyor/scenario.hpp"

#include "conveyor/csv.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/units.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace conveyor {

namespace {

// Flattened, always-present view of a run. Optional blocks carry an enabled
// flag so that a disabled block still round-trips its values.
struct Draft
{
  RunSpec run;
  bool noise_on = false;
  NoiseSettings noise;
  bool transport_on = false;
  TransportConfig transport;
  bool mixing_on = false;
  MixingLaserConfig mixing;
  bool ramp_on = false;
  double ramp_depth = 0.0;
  double ramp_temperature = 0.0;
  std::optional<double> t1;
};

Draft to_draft(RunSpec const &run)
{
  Draft d;
  d.run = run;
  auto const &e = run.experiment;
  if (run.noise) {
    d.noise_on = true;
    d.noise = *run.noise;
  }
  if (e.transport) {
    d.transport_on = true;
    d.transport = *e.transport;
  }
  if (e.mixing) {
    d.mixing_on = true;
    d.mixing = *e.mixing;
  }
  if (e.ramp_from_depth) {
    d.ramp_on = true;
    d.ramp_depth = *e.ramp_from_depth;
    d.ramp_temperature = e.ramp_from_temperature.value_or(0.0);
  }
  d.t1 = e.t1;
  return d;
}

RunSpec from_draft(Draft d)
{
  auto &e = d.run.experiment;
  d.run.noise = d.noise_on ? std::optional(d.noise) : std::nullopt;
  e.noise.reset();
  e.transport = d.transport_on ? std::optional(d.transport) : std::nullopt;
  e.mixing = d.mixing_on ? std::optional(d.mixing) : std::nullopt;
  if (d.ramp_on) {
    e.ramp_from_depth = d.ramp_depth;
    e.ramp_from_temperature = d.ramp_temperature;
  } else {
    e.ramp_from_depth.reset();
    e.ramp_from_temperature.reset();
  }
  e.t1 = d.t1;
  return std::move(d.run);
}

struct Raw
{
  std::string text;
  int line = 0;
};

[[noreturn]] void fail(std::string const &path, Raw const &raw, std::string const &what)
{
  throw ValidationError(path, what + " (line " + std::to_string(raw.line) + ")");
}

double parse_double(std::string const &path, Raw const &raw, std::string_view token)
{
  double v = 0.0;
  auto const *end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) { fail(path, raw, "not a number: '" + std::string(token) + "'"); }
  return v;
}

std::vector<std::string> tokens(std::string const &s)
{
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) { out.push_back(t); }
  return out;
}

// `number unit`; dimensionless values may omit the unit.
double parse_quantity(std::string const &path, Raw const &raw, Dimension dim, PhysConstants const &c,
                      std::string_view as_unit = {})
{
  auto const t = tokens(raw.text);
  if (t.empty() || t.size() > 2) { fail(path, raw, "expected 'value unit'"); }
  double const v = parse_double(path, raw, t[0]);
  if (t.size() == 1) {
    if (dim != Dimension::dimensionless) {
      fail(path, raw, "missing unit, expected " + std::string(si_unit(dim)) + " or a compatible unit");
    }
    return v;
  }
  Dimension got{};
  try {
    got = unit_dimension(t[1]);
  } catch (ConfigError const &) {
    fail(path, raw, "unknown unit '" + t[1] + "'");
  }
  if (got != dim) { fail(path, raw, "unit '" + t[1] + "' has the wrong dimension"); }
  if (!as_unit.empty()) { return convert_units(v, t[1], as_unit, c); }
  return to_si(v, t[1], c);
}

std::vector<double> parse_grid(std::string const &path, Raw const &raw, PhysConstants const &c)
{
  auto t = tokens(raw.text);
  if (t.size() < 2) { fail(path, raw, "expected a list of times followed by a unit"); }
  std::string const unit = t.back();
  t.pop_back();
  try {
    if (unit_dimension(unit) != Dimension::time) { fail(path, raw, "grid unit must be a time"); }
  } catch (ValidationError const &) {
    throw;
  } catch (ConfigError const &) {
    fail(path, raw, "unknown unit '" + unit + "'");
  }
  auto si = [&](double v) { return to_si(v, unit, c); };
  std::vector<double> out;
  if (t[0] == "linspace" || t[0] == "geomspace") {
    if (t.size() != 4) { fail(path, raw, t[0] + " takes start, stop and count"); }
    double const a = parse_double(path, raw, t[1]);
    double const b = parse_double(path, raw, t[2]);
    double const n = parse_double(path, raw, t[3]);
    if (n < 2 || n != std::floor(n)) { fail(path, raw, "count must be an integer >= 2"); }
    auto const count = static_cast<std::size_t>(n);
    if (t[0] == "geomspace" && !(a > 0.0 && b > 0.0)) { fail(path, raw, "geomspace needs positive bounds"); }
    for (std::size_t i = 0; i < count; ++i) {
      double const f = static_cast<double>(i) / static_cast<double>(count - 1);
      double const v = t[0] == "linspace" ? a + (b - a) * f : a * std::pow(b / a, f);
      out.push_back(si(v));
    }
    return out;
  }
  for (auto const &tok : t) { out.push_back(si(parse_double(path, raw, tok))); }
  return out;
}

bool parse_bool(std::string const &path, Raw const &raw)
{
  auto const s = csv::trim(raw.text);
  if (s == "true" || s == "yes" || s == "on") { return true; }
  if (s == "false" || s == "no" || s == "off") { return false; }
  fail(path, raw, "expected true or false");
}

template <class E>
E parse_enum(std::string const &path, Raw const &raw, std::vector<std::pair<char const *, E>> const &names)
{
  auto const s = csv::trim(raw.text);
  std::string options;
  for (auto const &[n, v] : names) {
    if (s == n) { return v; }
    options += options.empty() ? n : std::string(", ") + n;
  }
  fail(path, raw, "expected one of: " + options);
}

template <class E>
std::string enum_name(E v, std::vector<std::pair<char const *, E>> const &names)
{
  for (auto const &[n, e] : names) {
    if (e == v) { return n; }
  }
  throw ConfigError("unnamed enum value");
}

std::vector<std::pair<char const *, SequenceKind>> const kind_names{
  {"ramsey", SequenceKind::ramsey}, {"echo", SequenceKind::echo}, {"transport_echo", SequenceKind::transport_echo}};
std::vector<std::pair<char const *, SweepVariable>> const sweep_names{{"delay", SweepVariable::delay},
                                                                       {"tau_pi", SweepVariable::tau_pi}};
std::vector<std::pair<char const *, PulseMode>> const pulse_names{{"instantaneous", PulseMode::instantaneous},
                                                                   {"finite", PulseMode::finite_duration}};
std::vector<std::pair<char const *, AtomCountMode>> const count_names{{"poisson", AtomCountMode::poisson},
                                                                       {"fixed", AtomCountMode::fixed}};
std::vector<std::pair<char const *, NoiseSettings::Model>> const noise_names{
  {"white_floor", NoiseSettings::Model::white_floor}, {"curve", NoiseSettings::Model::curve}};
std::vector<std::pair<char const *, AnalysisKind>> const analysis_names{{"none", AnalysisKind::none},
                                                                        {"ramsey", AnalysisKind::ramsey},
                                                                        {"echo", AnalysisKind::echo},
                                                                        {"visibility", AnalysisKind::visibility}};
std::vector<std::pair<char const *, LineshapeForm>> const form_names{{"rounded", LineshapeForm::rounded},
                                                                     {"exact", LineshapeForm::exact}};

std::string q(double v, char const *unit) { return csv::format(v) + " " + unit; }

struct Field
{
  std::string section;
  std::string key;
  std::function<std::string(Draft const &)> write;
  std::function<void(Draft &, std::string const &path, Raw const &)> read;

  std::string path() const { return section + "." + key; }
};

// Single schema table: both directions of the format are driven from it, so
// a field cannot be written without being readable.
std::vector<Field> const &schema()
{
  using D = Dimension;
  static std::vector<Field> const fields = [] {
    std::vector<Field> f;
    auto quantity = [&](std::string s, std::string k, D dim, char const *unit, auto member) {
      f.push_back({s, k, [=](Draft const &d) { return q(member(d), unit); },
                   [=](Draft &d, std::string const &p, Raw const &r) {
                     member(d) = parse_quantity(p, r, dim, d.run.experiment.trap.constants);
                   }});
    };
    auto number = [&](std::string s, std::string k, auto member) {
      f.push_back({s, k, [=](Draft const &d) { return csv::format(member(d)); },
                   [=](Draft &d, std::string const &p, Raw const &r) {
                     member(d) = parse_quantity(p, r, D::dimensionless, d.run.experiment.trap.constants);
                   }});
    };
    auto flag = [&](std::string s, std::string k, auto member) {
      f.push_back({s, k, [=](Draft const &d) { return std::string(member(d) ? "true" : "false"); },
                   [=](Draft &d, std::string const &p, Raw const &r) { member(d) = parse_bool(p, r); }});
    };
    auto choice = [&](std::string s, std::string k, auto const &names, auto member) {
      f.push_back({s, k, [=, &names](Draft const &d) { return enum_name(member(d), names); },
                   [=, &names](Draft &d, std::string const &p, Raw const &r) { member(d) = parse_enum(p, r, names); }});
    };
#define M(expr) [](auto &d) -> auto & { return expr; }
    quantity("trap", "depth", D::energy, "J", M(d.run.experiment.trap.depth_U0));
    quantity("trap", "wavelength", D::length, "m", M(d.run.experiment.trap.wavelength));
    quantity("trap", "detuning", D::frequency, "rad/s", M(d.run.experiment.trap.effective_detuning));
    f.push_back({"trap", "temperature", [](Draft const &d) { return q(d.run.experiment.trap.temperature, "K"); },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   d.run.experiment.trap.temperature =
                     parse_quantity(p, r, D::energy, d.run.experiment.trap.constants, "K");
                 }});
    quantity("trap", "waist", D::length, "m", M(d.run.experiment.trap.waist));

    choice("sequence", "kind", kind_names, M(d.run.experiment.sequence.kind));
    choice("sequence", "sweep", sweep_names, M(d.run.experiment.sequence.sweep));
    f.push_back({"sequence", "grid",
                 [](Draft const &d) {
                   std::string s;
                   for (double v : d.run.experiment.sequence.grid) { s += csv::format(v) + " "; }
                   return s + "s";
                 },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   d.run.experiment.sequence.grid = parse_grid(p, r, d.run.experiment.trap.constants);
                 }});
    quantity("sequence", "tau_pi", D::time, "s", M(d.run.experiment.sequence.tau_pi));
    quantity("sequence", "echo_offset", D::time, "s", M(d.run.experiment.sequence.echo_offset));
    quantity("sequence", "detuning", D::frequency, "rad/s", M(d.run.experiment.sequence.detuning));
    f.push_back({"sequence", "rabi_frequency",
                 [](Draft const &d) { return q(d.run.experiment.sequence.half.rabi_frequency, "rad/s"); },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   double const v = parse_quantity(p, r, D::frequency, d.run.experiment.trap.constants);
                   d.run.experiment.sequence.half.rabi_frequency = v;
                   d.run.experiment.sequence.full.rabi_frequency = v;
                 }});
    f.push_back({"sequence", "pulse_mode",
                 [](Draft const &d) { return enum_name(d.run.experiment.sequence.half.mode, pulse_names); },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   auto const m = parse_enum(p, r, pulse_names);
                   d.run.experiment.sequence.half.mode = m;
                   d.run.experiment.sequence.full.mode = m;
                 }});

    f.push_back({"experiment", "shots",
                 [](Draft const &d) { return std::to_string(d.run.experiment.shots_per_point); },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   double const v = parse_quantity(p, r, D::dimensionless, {});
                   if (v < 1 || v != std::floor(v) || v > 1e9) { fail(p, r, "must be a positive integer"); }
                   d.run.experiment.shots_per_point = static_cast<std::size_t>(v);
                 }});
    number("experiment", "atoms", M(d.run.experiment.atoms_per_shot));
    choice("experiment", "atom_count", count_names, M(d.run.experiment.atom_count));
    number("experiment", "prep_efficiency", M(d.run.experiment.prep_efficiency));
    number("experiment", "transfer_survival", M(d.run.experiment.transfer_survival));
    f.push_back({"experiment", "t1", [](Draft const &d) { return d.t1 ? q(*d.t1, "s") : std::string("none"); },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   if (csv::trim(r.text) == "none") {
                     d.t1.reset();
                   } else {
                     d.t1 = parse_quantity(p, r, D::time, {});
                   }
                 }});
    flag("experiment", "truncate_energy", M(d.run.experiment.truncate_energy));
    f.push_back({"experiment", "seed", [](Draft const &d) { return std::to_string(d.run.experiment.seed); },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   auto const s = csv::trim(r.text);
                   std::uint64_t v = 0;
                   auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
                   if (ec != std::errc{} || ptr != s.data() + s.size()) { fail(p, r, "expected an unsigned integer"); }
                   d.run.experiment.seed = v;
                 }});

    number("detection", "p_survive_f4", M(d.run.experiment.detection.p_survive_given_F4));
    number("detection", "p_survive_f3", M(d.run.experiment.detection.p_survive_given_F3));

    flag("noise", "enabled", M(d.noise_on));
    choice("noise", "model", noise_names, M(d.noise.model));
    number("noise", "white", M(d.noise.white));
    quantity("noise", "reference_tau", D::time, "s", M(d.noise.reference_tau));
    number("noise", "floor", M(d.noise.floor));
    f.push_back({"noise", "curve", [](Draft const &d) { return d.noise.curve_path.empty() ? "-" : d.noise.curve_path; },
                 [](Draft &d, std::string const &, Raw const &r) {
                   auto const s = csv::trim(r.text);
                   d.noise.curve_path = s == "-" ? "" : s;
                 }});
    number("noise", "scale", M(d.noise.scale));
    number("noise", "worst_scale", M(d.noise.worst_scale));
    number("noise", "V0", M(d.noise.V0));

    flag("transport", "enabled", M(d.transport_on));
    quantity("transport", "distance", D::length, "m", M(d.transport.distance));
    quantity("transport", "leg_duration", D::time, "s", M(d.transport.leg_duration));
    quantity("transport", "hold", D::time, "s", M(d.transport.hold));

    flag("mixing", "enabled", M(d.mixing_on));
    quantity("mixing", "rate", D::rate, "1/s", M(d.mixing.scattering_rate_peak));
    quantity("mixing", "waist", D::length, "m", M(d.mixing.waist));
    quantity("mixing", "window", D::time, "s", M(d.mixing.window_duration));
    quantity("mixing", "center", D::length, "m", M(d.mixing.center_position));

    flag("ramp", "enabled", M(d.ramp_on));
    quantity("ramp", "from_depth", D::energy, "J", M(d.ramp_depth));
    f.push_back({"ramp", "from_temperature", [](Draft const &d) { return q(d.ramp_temperature, "K"); },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   d.ramp_temperature = parse_quantity(p, r, D::energy, d.run.experiment.trap.constants, "K");
                 }});

    choice("analysis", "fit", analysis_names, M(d.run.analysis.kind));
    choice("analysis", "form", form_names, M(d.run.analysis.form));
    f.push_back({"analysis", "achievable_max",
                 [](Draft const &d) {
                   return d.run.analysis.achievable_max ? csv::format(*d.run.analysis.achievable_max)
                                                        : std::string("auto");
                 },
                 [](Draft &d, std::string const &p, Raw const &r) {
                   if (csv::trim(r.text) == "auto") {
                     d.run.analysis.achievable_max.reset();
                   } else {
                     d.run.analysis.achievable_max = parse_quantity(p, r, D::dimensionless, {});
                   }
                 }});
#undef M
    return f;
  }();
  return fields;
}

Field const *find_field(std::string const &path)
{
  for (auto const &f : schema()) {
    if (f.path() == path) { return &f; }
  }
  return nullptr;
}

std::set<std::string> const optional_sections{"noise", "transport", "mixing", "ramp"};

void apply_entries(Draft &d, std::map<std::string, Raw> const &entries)
{
  for (auto const &f : schema()) {
    auto it = entries.find(f.path());
    if (it != entries.end()) { f.read(d, f.path(), it->second); }
  }
}

bool valid_name(std::string const &s)
{
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::string strip_comment(std::string const &line)
{
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
      return line.substr(0, i);
    }
  }
  return line;
}

} // namespace

Scenario parse_scenario(std::istream &in, std::string const &origin)
{
  std::map<std::string, Raw> shared;
  std::vector<std::pair<std::string, std::map<std::string, Raw>>> runs;
  std::map<std::string, Raw> top;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto const text = csv::trim(strip_comment(line));
    if (text.empty()) { continue; }
    if (text.front() == '[') {
      if (text.back() != ']') { throw ValidationError(origin, "malformed section header (line " + std::to_string(lineno) + ")"); }
      auto const name = csv::trim(text.substr(1, text.size() - 2));
      if (name.rfind("run ", 0) == 0 || name.rfind("run\t", 0) == 0) {
        auto const run_name = csv::trim(name.substr(4));
        if (!valid_name(run_name)) {
          throw ValidationError("run", "invalid run name '" + run_name + "' (line " + std::to_string(lineno) + ")");
        }
        for (auto const &r : runs) {
          if (r.first == run_name) {
            throw ValidationError("run." + run_name, "duplicate run (line " + std::to_string(lineno) + ")");
          }
        }
        runs.emplace_back(run_name, std::map<std::string, Raw>{});
        section = "run";
        continue;
      }
      bool known = false;
      for (auto const &f : schema()) { known = known || f.section == name; }
      if (!known) { throw ValidationError(name, "unknown section (line " + std::to_string(lineno) + ")"); }
      if (!runs.empty()) {
        throw ValidationError(name, "shared sections must precede run blocks (line " + std::to_string(lineno) + ")");
      }
      section = name;
      continue;
    }
    auto const eq = text.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(section.empty() ? origin : section,
                            "expected 'key = value' (line " + std::to_string(lineno) + ")");
    }
    auto const key = csv::trim(text.substr(0, eq));
    Raw raw{csv::trim(text.substr(eq + 1)), lineno};
    if (section.empty()) {
      if (key != "schema" && key != "name" && key != "description") {
        throw ValidationError(key, "unknown key (line " + std::to_string(lineno) + ")");
      }
      if (top.count(key)) { throw ValidationError(key, "duplicate key (line " + std::to_string(lineno) + ")"); }
      top[key] = raw;
      continue;
    }
    std::string const path = section == "run" ? key : section + "." + key;
    std::string const shown = section == "run" ? "run." + runs.back().first + "." + key : path;
    if (!find_field(path)) { throw ValidationError(shown, "unknown key (line " + std::to_string(lineno) + ")"); }
    auto &target = section == "run" ? runs.back().second : shared;
    if (target.count(path)) { throw ValidationError(shown, "duplicate key (line " + std::to_string(lineno) + ")"); }
    target[path] = raw;
  }

  if (!top.count("schema")) { throw ValidationError("schema", "missing schema version"); }
  auto const version = parse_quantity("schema", top["schema"], Dimension::dimensionless, {});
  if (version != scenario_schema_version) {
    throw ValidationError("schema", "unsupported version " + csv::format(version) + ", expected " +
                                      std::to_string(scenario_schema_version));
  }
  Scenario s;
  s.name = top.count("name") ? top["name"].text : "scenario";
  if (!valid_name(s.name)) { throw ValidationError("name", "use letters, digits, '_' or '-'"); }
  s.description = top.count("description") ? top["description"].text : "";
  if (runs.empty()) { runs.emplace_back("main", std::map<std::string, Raw>{}); }

  for (auto const &[run_name, overrides] : runs) {
    auto merged = shared;
    for (auto const &[k, v] : overrides) { merged[k] = v; }
    Draft d;
    // A block that appears at all is switched on unless it says otherwise.
    for (auto const &sec : optional_sections) {
      bool present = false;
      for (auto const &[k, v] : merged) { present = present || k.rfind(sec + ".", 0) == 0; }
      if (present && !merged.count(sec + ".enabled")) { merged[sec + ".enabled"] = Raw{"true", 0}; }
    }
    try {
      apply_entries(d, merged);
    } catch (ValidationError const &e) {
      // Shared entries are reported under their own path.
      if (!overrides.count(e.field())) { throw; }
      throw ValidationError("run." + run_name + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
    }
    d.run.name = run_name;
    s.runs.push_back(from_draft(std::move(d)));
  }
  return s;
}

Scenario load_scenario(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open scenario " + path.string()); }
  auto s = parse_scenario(in, path.string());
  s.base_dir = path.parent_path();
  return s;
}

std::string serialize_scenario(Scenario const &s)
{
  if (s.runs.empty()) { throw ConfigError("scenario has no runs"); }
  std::ostringstream out;
  out << "schema = " << scenario_schema_version << '\n';
  out << "name = " << s.name << '\n';
  if (!s.description.empty()) { out << "description = " << s.description << '\n'; }
  auto const base = to_draft(s.runs.front());
  std::string section;
  for (auto const &f : schema()) {
    if (f.section != section) {
      section = f.section;
      out << "\n[" << section << "]\n";
    }
    out << f.key << " = " << f.write(base) << '\n';
  }
  for (auto const &run : s.runs) {
    out << "\n[run " << run.name << "]\n";
    auto const d = to_draft(run);
    for (auto const &f : schema()) {
      auto const v = f.write(d);
      if (v != f.write(base)) { out << f.path() << " = " << v << '\n'; }
    }
  }
  return out.str();
}

void Scenario::validate() const
{
  if (runs.empty()) { throw ValidationError("run", "scenario has no runs"); }
  for (auto const &run : runs) {
    auto const prefix = "run." + run.name + ".";
    try {
      experiment_config(run, base_dir).validate();
    } catch (ValidationError const &e) {
      throw ValidationError(prefix + e.field(), std::string(e.what()).substr(e.field().size() + 2));
    }
    auto const &seq = run.experiment.sequence;
    switch (run.analysis.kind) {
    case AnalysisKind::none: break;
    case AnalysisKind::ramsey:
      if (seq.kind != SequenceKind::ramsey) { throw ValidationError(prefix + "analysis.fit", "needs a Ramsey sequence"); }
      break;
    case AnalysisKind::echo:
      if (seq.kind == SequenceKind::ramsey || seq.sweep != SweepVariable::delay) {
        throw ValidationError(prefix + "analysis.fit", "needs an echo sequence swept in delay");
      }
      break;
    case AnalysisKind::visibility:
      if (seq.kind == SequenceKind::ramsey || seq.sweep != SweepVariable::tau_pi || seq.echo_offset != 0.0) {
        throw ValidationError(prefix + "analysis.fit", "needs an echo sequence swept in tau_pi with zero offset");
      }
      break;
    }
    if (run.analysis.achievable_max && !(*run.analysis.achievable_max > 0.0 && *run.analysis.achievable_max <= 1.0)) {
      throw ValidationError(prefix + "analysis.achievable_max", "must lie in (0, 1]");
    }
    if (run.noise) {
      auto const &n = *run.noise;
      if (!(n.white >= 0.0 && n.floor >= 0.0 && n.reference_tau > 0.0)) {
        throw ValidationError(prefix + "noise", "white and floor must be non-negative, reference_tau positive");
      }
      if (!(n.scale >= 0.0 && n.worst_scale >= 0.0)) {
        throw ValidationError(prefix + "noise.scale", "must be non-negative");
      }
    }
  }
}

std::optional<VisibilityModel> visibility_model(RunSpec const &run, double scale, std::filesystem::path const &base_dir)
{
  if (!run.noise) { return std::nullopt; }
  auto const &n = *run.noise;
  VisibilityModel m;
  m.delta0 = derive_trap_params(run.experiment.trap).delta0;
  m.V0 = n.V0;
  m.sigma_scale = scale;
  if (n.model == NoiseSettings::Model::curve) {
    if (n.curve_path.empty()) { throw ValidationError("noise.curve", "required for the curve model"); }
    std::filesystem::path p = n.curve_path;
    if (p.is_relative() && !base_dir.empty()) { p = base_dir / p; }
    m.allan = read_allan_curve(p);
  } else {
    m.allan = white_plus_floor(n.white, n.reference_tau, n.floor);
  }
  return m;
}

ExperimentConfig experiment_config(RunSpec const &run, std::filesystem::path const &base_dir)
{
  auto cfg = run.experiment;
  cfg.noise = visibility_model(run, run.noise ? run.noise->scale : 1.0, base_dir);
  return cfg;
}

double achievable_max(RunSpec const &run)
{
  if (run.analysis.achievable_max) { return *run.analysis.achievable_max; }
  auto const &e = run.experiment;
  double kept = 1.0;
  if (e.ramp_from_depth && e.ramp_from_temperature) {
    // Adiabatic lowering keeps atoms with E < sqrt(U_from U_to).
    double const threshold = std::sqrt(*e.ramp_from_depth * e.trap.depth_U0);
    kept = thermal_energy_cdf(threshold / (e.trap.constants.k_B * *e.ramp_from_temperature));
  }
  return e.prep_efficiency * e.transfer_survival * kept * e.detection.p_survive_given_F3;
}

} // namespace conveyor

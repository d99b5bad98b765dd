#include "conveyor/errors.hpp"
#include "conveyor/scenario.hpp"

#include <sstream>

namespace conveyor {

namespace {

// Temperatures are not measured quantities here. They are inferred from the
// fitted T2* through T2* = 1.67 K and K = 2 hbar / (|eta| k_B T).

constexpr char const *fig1a = R"(# Mirrors figure 1(a): Ramsey fringe and spin echo at U0 = 1 mK.
schema = 1
name = fig1a
description = Ramsey and spin echo at U0 = 1 mK, pi pulse at 4 ms

[trap]
depth = 1.0 mK
wavelength = 1064 nm
detuning = -64 THz
# inferred from T2* = 0.86 ms
temperature = 206.53 uK
waist = 20 um

[sequence]
kind = ramsey
sweep = delay
grid = linspace 0 2 81 ms
detuning = 0 Hz
rabi_frequency = 10 kHz

[experiment]
shots = 30
atoms = 50
prep_efficiency = 0.8
transfer_survival = 0.8
seed = 20031

[detection]
p_survive_f4 = 0.01
p_survive_f3 = 0.95

# simulated between the best (scale 1) and worst (scale 3) curves
[noise]
model = white_floor
white = 0.05 %
reference_tau = 100 ms
floor = 0.3 %
scale = 1.7
worst_scale = 3

[analysis]
fit = ramsey
form = rounded

[run ramsey]

[run echo]
sequence.kind = echo
sequence.tau_pi = 4 ms
sequence.grid = linspace 6 10 81 ms
analysis.fit = echo
)";

constexpr char const *fig1b = R"(# Mirrors figure 1(b): Ramsey fringe and two spin echoes at U0 = 0.04 mK.
schema = 1
name = fig1b
description = Ramsey and spin echoes at U0 = 0.04 mK after lowering from 1 mK

[trap]
depth = 0.04 mK
wavelength = 1064 nm
detuning = -64 THz
# inferred from T2* = 18.9 ms
temperature = 9.398 uK
waist = 20 um

[sequence]
kind = ramsey
sweep = delay
grid = linspace 0 40 81 ms
detuning = 0 Hz
rabi_frequency = 10 kHz

[experiment]
shots = 30
atoms = 50
prep_efficiency = 0.8
transfer_survival = 0.8
seed = 20032

[detection]
p_survive_f4 = 0.01
p_survive_f3 = 0.95

[noise]
model = white_floor
white = 0.05 %
reference_tau = 100 ms
floor = 0.3 %
scale = 1.7
worst_scale = 3

# hot atoms leave while the trap is lowered from the loading depth
[ramp]
from_depth = 1.0 mK
from_temperature = 206.53 uK

[analysis]
fit = ramsey
form = rounded

[run ramsey]

[run echo_100ms]
sequence.kind = echo
sequence.tau_pi = 50 ms
sequence.grid = linspace 70 130 121 ms
analysis.fit = echo

[run echo_300ms]
sequence.kind = echo
sequence.tau_pi = 150 ms
sequence.grid = linspace 270 330 121 ms
analysis.fit = echo
)";

constexpr char const *fig1c = R"(# Mirrors figure 1(c): echo visibility against 2 tau_pi at both depths,
# with the best and worst case noise predictions.
schema = 1
name = fig1c
description = Spin echo visibility decay at U0 = 1 mK and 0.04 mK

[trap]
depth = 1.0 mK
wavelength = 1064 nm
detuning = -64 THz
# inferred from T2* = 0.86 ms
temperature = 206.53 uK
waist = 20 um

[sequence]
kind = echo
sweep = tau_pi
grid = geomspace 1 20 12 ms
detuning = 0 Hz
rabi_frequency = 10 kHz

[experiment]
shots = 30
atoms = 50
prep_efficiency = 0.8
transfer_survival = 0.8
seed = 20033

[detection]
p_survive_f4 = 0.01
p_survive_f3 = 0.95

[noise]
model = white_floor
white = 0.05 %
reference_tau = 100 ms
floor = 0.3 %
scale = 1.7
worst_scale = 3

[analysis]
fit = visibility

[run deep]

[run shallow]
trap.depth = 0.04 mK
# inferred from T2* = 18.9 ms
trap.temperature = 9.398 uK
sequence.grid = geomspace 10 250 12 ms
ramp.from_depth = 1.0 mK
ramp.from_temperature = 206.53 uK
)";

// Shared body of the transport figures. Mean energy 0.3 U0 = 1.5 k_B T
// at U0 = 0.1 mK gives T = 20 uK.
constexpr char const *fig3_common = R"(
[trap]
depth = 0.1 mK
wavelength = 1064 nm
detuning = -64 THz
# inferred from the mean energy 0.3 U0
temperature = 20 uK
waist = 20 um

[sequence]
kind = echo
sweep = delay
tau_pi = 20 ms
grid = linspace 25 55 61 ms
detuning = 0 Hz
rabi_frequency = 10 kHz

[experiment]
shots = 30
atoms = 50
prep_efficiency = 0.8
transfer_survival = 0.8
seed = @SEED@

[detection]
p_survive_f4 = 0.01
p_survive_f3 = 0.95

[noise]
model = white_floor
white = 0 %
reference_tau = 100 ms
floor = 0.5 %
scale = 1
worst_scale = 3

[ramp]
from_depth = 1.0 mK
from_temperature = 206.53 uK

[transport]
enabled = false
distance = 1 mm
leg_duration = 2 ms
hold = 3 ms

[mixing]
enabled = false
rate = 2 1/ms
waist = 50 um
window = 3 ms
center = 0 mm
)";

std::string fig3(char const *head, char const *seed, char const *runs)
{
  std::string common = fig3_common;
  common.replace(common.find("@SEED@"), 6, seed);
  return std::string(head) + common + runs;
}

struct Entry
{
  char const *name;
  char const *summary;
  std::string text;
};

std::vector<Entry> const &entries()
{
  static std::vector<Entry> const list{
    {"fig1a", "Ramsey and echo at U0 = 1 mK", fig1a},
    {"fig1b", "Ramsey and echoes up to 2 tau_pi = 300 ms at U0 = 0.04 mK", fig1b},
    {"fig1c", "echo visibility decay at both depths with noise band", fig1c},
    {"fig3a", "echo without transport, with and without mixing laser",
     fig3("# Mirrors figure 3(a): spin echo without transport, with and without the mixing laser.\n"
          "schema = 1\nname = fig3a\ndescription = Echo without transport at U0 = 0.1 mK\n",
          "20034", "\n[analysis]\nfit = echo\n"
          "\n[run no_mixing]\n\n[run mixing]\nmixing.enabled = true\n")},
    {"fig3b", "echo with 1 mm transport and mixing laser at the start position",
     fig3("# Mirrors figure 3(b): spin echo with transport over 1 mm, mixing laser at the start position.\n"
          "schema = 1\nname = fig3b\ndescription = Echo with transport at U0 = 0.1 mK\n",
          "20035", "\n[analysis]\nfit = echo\n"
          "\n[run transport]\nsequence.kind = transport_echo\ntransport.enabled = true\nmixing.enabled = true\n")},
    {"fig3c", "echo visibility decay with and without transport",
     fig3("# Mirrors figure 3(c): echo visibility with and without transport.\n"
          "schema = 1\nname = fig3c\ndescription = Echo visibility with and without transport at U0 = 0.1 mK\n",
          "20036", "\n[analysis]\nfit = visibility\n"
          "\n[run static]\nsequence.sweep = tau_pi\nsequence.grid = geomspace 6 200 14 ms\n"
          "\n[run transport]\nsequence.kind = transport_echo\nsequence.sweep = tau_pi\n"
          "sequence.grid = geomspace 6 200 14 ms\ntransport.enabled = true\nmixing.enabled = true\n")},
  };
  return list;
}

} // namespace

std::vector<PresetInfo> preset_list()
{
  std::vector<PresetInfo> out;
  for (auto const &e : entries()) { out.push_back({e.name, e.summary}); }
  return out;
}

std::string preset_text(std::string const &name)
{
  for (auto const &e : entries()) {
    if (name == e.name) { return e.text; }
  }
  throw ConfigError("unknown preset '" + name + "'");
}

Scenario load_preset(std::string const &name)
{
  std::istringstream in(preset_text(name));
  return parse_scenario(in, "preset " + name);
}

} // namespace conveyor

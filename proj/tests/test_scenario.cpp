#include "conveyor/errors.hpp"
#include "conveyor/pipeline.hpp"
#include "conveyor/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <regex>
#include <sstream>

using namespace conveyor;

namespace {

Scenario parse(std::string const &text)
{
  std::istringstream in(text);
  return parse_scenario(in);
}

std::string error_field(std::string const &text)
{
  try {
    parse(text).validate();
  } catch (ValidationError const &e) {
    return e.field();
  }
  return "<no error>";
}

std::string const minimal = R"(schema = 1
name = tiny

[trap]
depth = 1 mK
temperature = 50 uK

[sequence]
kind = ramsey
grid = linspace 0 1 11 ms

[experiment]
shots = 2
atoms = 5

[run a]
)";

double attr(std::string const &svg, std::string const &name)
{
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, std::regex(name + "=\"([^\"]+)\"")));
  return std::stod(m[1]);
}

} // namespace

TEST_CASE("every preset parses, validates and says what it mirrors")
{
  auto const list = preset_list();
  CHECK(list.size() == 6);
  for (auto const &p : list) {
    CAPTURE(p.name);
    auto const s = load_preset(p.name);
    CHECK_NOTHROW(s.validate());
    CHECK(s.name == p.name);
    CHECK_FALSE(s.runs.empty());
    CHECK(preset_text(p.name).find("figure") != std::string::npos);
  }
  CHECK_THROWS_AS(preset_text("fig9"), ConfigError);
}

TEST_CASE("serialization is a fixed point and preserves every number")
{
  for (auto const &p : preset_list()) {
    CAPTURE(p.name);
    auto const s = load_preset(p.name);
    auto const text = serialize_scenario(s);
    auto const again = parse(text);
    CHECK(serialize_scenario(again) == text);
    REQUIRE(again.runs.size() == s.runs.size());
    for (std::size_t i = 0; i < s.runs.size(); ++i) {
      auto const a = experiment_config(s.runs[i]);
      auto const b = experiment_config(again.runs[i]);
      CHECK(a.trap.depth_U0 == b.trap.depth_U0);
      CHECK(a.trap.temperature == b.trap.temperature);
      CHECK(a.trap.effective_detuning == b.trap.effective_detuning);
      CHECK(a.sequence.grid == b.sequence.grid);
      CHECK(a.sequence.tau_pi == b.sequence.tau_pi);
      CHECK(a.sequence.detuning == b.sequence.detuning);
      CHECK(a.prep_efficiency == b.prep_efficiency);
      CHECK(a.seed == b.seed);
      CHECK(a.ramp_from_depth == b.ramp_from_depth);
      CHECK(a.transport.has_value() == b.transport.has_value());
      CHECK(a.mixing.has_value() == b.mixing.has_value());
      CHECK(achievable_max(s.runs[i]) == achievable_max(again.runs[i]));
      if (a.noise) {
        REQUIRE(b.noise);
        CHECK(a.noise->sigma_A(0.01) == b.noise->sigma_A(0.01));
        CHECK(a.noise->delta0 == b.noise->delta0);
      }
    }
  }
}

TEST_CASE("run blocks override the shared sections")
{
  auto const s = parse(minimal + "[run b]\ntrap.temperature = 10 uK\nsequence.grid = 0 0.5 1 ms\n");
  REQUIRE(s.runs.size() == 2);
  auto const a = experiment_config(s.runs[0]);
  auto const b = experiment_config(s.runs[1]);
  CHECK(a.trap.temperature == doctest::Approx(50e-6));
  CHECK(b.trap.temperature == doctest::Approx(10e-6));
  CHECK(b.sequence.grid == std::vector<double>{0.0, 0.5e-3, 1e-3});
  CHECK(a.sequence.grid.size() == 11);
  CHECK(a.sequence.grid[10] == doctest::Approx(1e-3));
}

TEST_CASE("schema violations name the offending key")
{
  CHECK(error_field(minimal) == "<no error>");
  std::string t = minimal;
  CHECK(error_field(std::regex_replace(t, std::regex("depth = 1 mK"), "depht = 1 mK")) == "trap.depht");
  CHECK(error_field(std::regex_replace(t, std::regex("depth = 1 mK"), "depth = 1")) == "trap.depth");
  CHECK(error_field(std::regex_replace(t, std::regex("depth = 1 mK"), "depth = 1 ms")) == "trap.depth");
  CHECK(error_field(std::regex_replace(t, std::regex("\\[trap\\]"), "[trapp]")) == "trapp");
  CHECK(error_field(std::regex_replace(t, std::regex("schema = 1"), "schema = 2")) == "schema");
  CHECK(error_field(std::regex_replace(t, std::regex("schema = 1\n"), "")) == "schema");
  CHECK(error_field(minimal + "trap.foo = 3\n") == "run.a.trap.foo");
  CHECK(error_field(minimal + "experiment.prep_efficiency = 1.5\n") == "run.a.experiment.prep_efficiency");
  CHECK(error_field(minimal + "[analysis]\nfit = echo\n").find("analysis") != std::string::npos);
  // Without run blocks the shared sections form a single run.
  auto const single = parse(std::regex_replace(t, std::regex("\\[run a\\]\n"), ""));
  REQUIRE(single.runs.size() == 1);
  CHECK(single.runs[0].name == "main");

  try {
    parse(std::regex_replace(t, std::regex("depth = 1 mK"), "depht = 1 mK"));
  } catch (ValidationError const &e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
}

TEST_CASE("achievable maximum follows the loss channels")
{
  auto const fig1a = load_preset("fig1a");
  CHECK(achievable_max(fig1a.runs[0]) == doctest::Approx(0.8 * 0.8 * 0.95));
  auto const fig1b = load_preset("fig1b");
  auto const cfg = experiment_config(fig1b.runs[0]);
  REQUIRE(cfg.ramp_from_depth);
  double const kT = cfg.trap.constants.k_B * *cfg.ramp_from_temperature;
  double const kept = thermal_energy_cdf(std::sqrt(*cfg.ramp_from_depth * cfg.trap.depth_U0) / kT);
  CHECK(achievable_max(fig1b.runs[0]) == doctest::Approx(0.8 * 0.8 * 0.95 * kept));
}

TEST_CASE("the plotted fit curve maps back onto the fitted model")
{
  auto s = load_preset("fig1a");
  auto const out = execute_run(s, s.runs[0]);
  REQUIRE(out.fit);
  auto const svg = render_svg(outcome_plot(out));
  double const x0 = attr(svg, "data-x-min"), x1 = attr(svg, "data-x-max");
  double const y0 = attr(svg, "data-y-min"), y1 = attr(svg, "data-y-max");
  double const scale = attr(svg, "data-x-scale");
  double const left = attr(svg, "data-left"), right = attr(svg, "data-right");
  double const top = attr(svg, "data-top"), bottom = attr(svg, "data-bottom");
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, std::regex("<polyline class=\"curve\"[^>]*points=\"([^\"]+)\"")));
  std::istringstream pts(m[1]);
  std::string pair;
  int checked = 0;
  double const y_per_px = (y1 - y0) / (bottom - top);
  while (pts >> pair) {
    auto const comma = pair.find(',');
    double const px = std::stod(pair.substr(0, comma));
    double const py = std::stod(pair.substr(comma + 1));
    double const x = (x0 + (px - left) / (right - left) * (x1 - x0)) / scale;
    double const y = y0 + (bottom - py) * y_per_px;
    // Coordinates carry 3 decimals; allow for the resulting slope error too.
    CHECK(std::abs(y - evaluate_fit(*out.fit, x)) < 0.05 * y_per_px + 2e-3 * (y1 - y0));
    ++checked;
  }
  CHECK(checked > 100);
  // Every data point is drawn.
  std::regex const point_re("class=\"point\"");
  auto const circles = std::distance(std::sregex_iterator(svg.begin(), svg.end(), point_re), std::sregex_iterator());
  CHECK(circles == static_cast<long>(out.data.points.size()));
}

TEST_CASE("runs are reproducible")
{
  auto const s = load_preset("fig1a");
  auto const a = execute_run(s, s.runs[1], {1});
  auto const b = execute_run(s, s.runs[1], {3});
  std::ostringstream sa, sb;
  write_dataset(sa, a.data);
  write_dataset(sb, b.data);
  CHECK(sa.str() == sb.str());
  REQUIRE(a.fit);
  CHECK(a.fit->value("center") == b.fit->value("center"));
}

TEST_CASE("echo-centre visibility extraction")
{
  DataSet d;
  d.points = {{1e-3, 0.0, 0.01, 0, 0}, {2e-3, 0.15, 0.02, 0, 0}};
  auto const v = extract_visibility(d, 0.6);
  REQUIRE(v.size() == 2);
  CHECK(v[0].V == doctest::Approx(1.0));
  CHECK(v[1].V == doctest::Approx(0.5));
  CHECK(v[1].error == doctest::Approx(2 * 0.02 / 0.6));
}

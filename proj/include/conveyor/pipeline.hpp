#pragma once

#include "conveyor/fit.hpp"
#include "conveyor/plot.hpp"
#include "conveyor/scenario.hpp"
#include "conveyor/shot_simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace conveyor {

// Everything produced by one run of a scenario.
struct RunOutcome
{
  std::string scenario;
  RunSpec run;
  DataSet data;
  double achievable_max = 1.0;
  std::optional<FitResult> fit; // Ramsey, echo, or Gaussian visibility decay
  std::vector<VisibilityPoint> visibility;
  std::optional<FitResult> allan_fit; // visibility decay against the configured noise curve
  std::optional<VisibilityBand> band;

  std::string stem() const { return scenario + "_" + run.name; }
};

RunOutcome execute_run(Scenario const &scenario, RunSpec const &run, RunOptions const &options = {});
std::vector<RunOutcome> execute_scenario(Scenario const &scenario, RunOptions const &options = {});

// Echo-centre visibilities of a tau_pi sweep.
std::vector<VisibilityPoint> extract_visibility(DataSet const &data, double achievable_max);

PlotSpec dataset_plot(DataSet const &data, std::optional<FitResult> const &fit, std::string const &title);
PlotSpec visibility_plot(std::vector<VisibilityPoint> const &points, std::optional<FitResult> const &fit,
                         std::optional<VisibilityBand> const &band, std::string const &title);
PlotSpec outcome_plot(RunOutcome const &outcome);

// Writes <stem>.csv (+ .meta), <stem>_fit.json, <stem>_visibility.csv and
// <stem>.svg as applicable. Returns the paths written.
std::vector<std::filesystem::path> write_outcome(RunOutcome const &outcome, std::filesystem::path const &dir);

} // namespace conveyor

#include "conveyor/pipeline.hpp"

#include "conveyor/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace conveyor {

namespace {

std::vector<double> sample_range(double lo, double hi, std::size_t n)
{
  std::vector<double> x;
  for (std::size_t i = 0; i < n; ++i) { x.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)); }
  return x;
}

} // namespace

std::vector<VisibilityPoint> extract_visibility(DataSet const &data, double achievable_max)
{
  std::vector<VisibilityPoint> out;
  for (auto const &p : data.points) {
    out.push_back({p.x, visibility_from_center(p.p3_mean, achievable_max), 2.0 * p.p3_stderr / achievable_max});
  }
  return out;
}

RunOutcome execute_run(Scenario const &scenario, RunSpec const &run, RunOptions const &options)
{
  RunOutcome out;
  out.scenario = scenario.name;
  out.run = run;
  out.data = run_experiment(experiment_config(run, scenario.base_dir), options);
  out.achievable_max = achievable_max(run);
  auto const &seq = run.experiment.sequence;
  switch (run.analysis.kind) {
  case AnalysisKind::none: break;
  case AnalysisKind::ramsey: out.fit = fit_ramsey(out.data, run.analysis.form); break;
  case AnalysisKind::echo: out.fit = fit_echo(out.data, seq.tau_pi, run.analysis.form, out.achievable_max); break;
  case AnalysisKind::visibility: {
    out.visibility = extract_visibility(out.data, out.achievable_max);
    out.fit = fit_visibility_decay(out.visibility, VisibilityModelKind::gaussian_sigma);
    if (run.noise) {
      auto const best = visibility_model(run, 1.0, scenario.base_dir);
      auto const worst = visibility_model(run, run.noise->worst_scale, scenario.base_dir);
      out.allan_fit = fit_visibility_decay(out.visibility, VisibilityModelKind::allan_curve, &*best);
      out.band = visibility_band(sample_range(seq.grid.front(), seq.grid.back(), 200), *best, *worst);
    }
    break;
  }
  }
  return out;
}

std::vector<RunOutcome> execute_scenario(Scenario const &scenario, RunOptions const &options)
{
  scenario.validate();
  std::vector<RunOutcome> out;
  for (auto const &run : scenario.runs) { out.push_back(execute_run(scenario, run, options)); }
  return out;
}

PlotSpec dataset_plot(DataSet const &data, std::optional<FitResult> const &fit, std::string const &title)
{
  PlotSpec spec;
  spec.title = title;
  spec.x_label = "t (ms)";
  spec.y_label = "P3";
  spec.x_scale = 1e3;
  spec.series.push_back({"data", data.xs(), data.p3(), data.stderrs()});
  if (fit && !fit->degenerate && !data.points.empty()) {
    PlotCurve c{fit->model + " fit", sample_range(data.points.front().x, data.points.back().x, 400), {}, false};
    for (double x : c.x) { c.y.push_back(evaluate_fit(*fit, x)); }
    spec.curves.push_back(std::move(c));
  }
  return spec;
}

PlotSpec visibility_plot(std::vector<VisibilityPoint> const &points, std::optional<FitResult> const &fit,
                         std::optional<VisibilityBand> const &band, std::string const &title)
{
  PlotSpec spec;
  spec.title = title;
  spec.x_label = "tau_pi (ms)";
  spec.y_label = "echo visibility";
  spec.x_scale = 1e3;
  PlotSeries s{"data", {}, {}, {}};
  for (auto const &p : points) {
    s.x.push_back(p.tau_pi);
    s.y.push_back(p.V);
    s.err.push_back(p.error);
  }
  spec.series.push_back(std::move(s));
  if (band) {
    spec.curves.push_back({"best case", band->tau_pi, band->upper, true});
    spec.curves.push_back({"worst case", band->tau_pi, band->lower, true});
  }
  if (fit && !points.empty()) {
    PlotCurve c{"gaussian fit", sample_range(0.0, points.back().tau_pi, 400), {}, false};
    for (double x : c.x) { c.y.push_back(evaluate_fit(*fit, x)); }
    spec.curves.push_back(std::move(c));
  }
  return spec;
}

PlotSpec outcome_plot(RunOutcome const &outcome)
{
  if (outcome.run.analysis.kind == AnalysisKind::visibility) {
    return visibility_plot(outcome.visibility, outcome.fit, outcome.band, outcome.stem());
  }
  return dataset_plot(outcome.data, outcome.fit, outcome.stem());
}

std::vector<std::filesystem::path> write_outcome(RunOutcome const &outcome, std::filesystem::path const &dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) { throw IoError("cannot create output directory " + dir.string()); }
  std::vector<std::filesystem::path> written;
  auto open = [&](std::filesystem::path const &p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) { throw IoError("cannot write " + p.string()); }
    written.push_back(p);
    return f;
  };
  auto const stem = outcome.stem();
  auto const csv_path = dir / (stem + ".csv");
  write_dataset(csv_path, outcome.data);
  written.push_back(csv_path);
  written.push_back(dir / (stem + ".csv.meta"));
  if (outcome.fit) {
    auto f = open(dir / (stem + "_fit.json"));
    write_fit_result(f, *outcome.fit);
  }
  if (outcome.allan_fit) {
    auto f = open(dir / (stem + "_allan_fit.json"));
    write_fit_result(f, *outcome.allan_fit);
  }
  if (!outcome.visibility.empty()) {
    auto f = open(dir / (stem + "_visibility.csv"));
    write_visibility(f, outcome.visibility);
  }
  {
    auto f = open(dir / (stem + ".svg"));
    f << render_svg(outcome_plot(outcome));
    if (!f) { throw IoError("write failed for " + (dir / (stem + ".svg")).string()); }
  }
  return written;
}

} // namespace conveyor

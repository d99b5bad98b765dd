#include "conveyor/errors.hpp"
#include "conveyor/fit.hpp"
#include "conveyor/units.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace conveyor;

namespace {

DataSet synthetic(std::vector<double> const &x, std::function<double(double)> const &f, double noise = 0.0,
                  std::uint64_t seed = 1)
{
  DataSet d;
  auto rng = rng_stream(seed, 0, 0, 0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double t : x) {
    double const e = noise > 0.0 ? noise * g(rng) : 0.0;
    d.points.push_back({t, f(t) + e, noise, 0, 0});
  }
  return d;
}

std::vector<double> linspace(double a, double b, int n)
{
  std::vector<double> v;
  for (int i = 0; i < n; ++i) { v.push_back(a + (b - a) * i / (n - 1)); }
  return v;
}


} // namespace

TEST_CASE("noiseless Ramsey fringes are recovered exactly")
{
  double const w = two_pi * 3e3;
  for (auto form : {LineshapeForm::rounded, LineshapeForm::exact}) {
    auto const d = synthetic(linspace(0, 2e-3, 81), [&](double t) { return ramsey_model(t, 0.3, 0.32, 0.86e-3, w, 0.4, form); });
    auto const r = fit_ramsey(d, form);
    REQUIRE(r.converged);
    CHECK(r.value("amplitude") == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(r.value("offset") == doctest::Approx(0.32).epsilon(1e-6));
    CHECK(r.value("T2_star") == doctest::Approx(0.86e-3).epsilon(1e-6));
    CHECK(r.value("fringe_frequency") == doctest::Approx(w).epsilon(1e-6));
    CHECK(r.value("phase") == doctest::Approx(0.4).epsilon(1e-6));
    for (double t : {0.1e-3, 1.3e-3}) {
      CHECK(evaluate_fit(r, t) == doctest::Approx(ramsey_model(t, 0.3, 0.32, 0.86e-3, w, 0.4, form)).epsilon(1e-6));
    }
  }
}

TEST_CASE("noiseless echo fringes are recovered exactly")
{
  double const w = two_pi * 3e3;
  auto const truth = [&](double t) { return echo_model(t, 0.35, 0.4, 0.86e-3, w, -0.2, 8.02e-3, LineshapeForm::rounded); };
  auto const r = fit_echo(synthetic(linspace(6e-3, 10e-3, 81), truth), 4e-3, LineshapeForm::rounded, 0.8);
  REQUIRE(r.converged);
  CHECK(r.value("amplitude") == doctest::Approx(0.35).epsilon(1e-6));
  CHECK(r.value("center") == doctest::Approx(8.02e-3).epsilon(1e-6));
  CHECK(r.value("T2_star") == doctest::Approx(0.86e-3).epsilon(1e-6));
  CHECK(r.value("tau_pi") == doctest::Approx(4.01e-3).epsilon(1e-6));
  CHECK(r.value("visibility") == doctest::Approx(0.35 * 2 / 0.8).epsilon(1e-6));
  CHECK(evaluate_fit(r, 7e-3) == doctest::Approx(truth(7e-3)).epsilon(1e-6));
  CHECK_THROWS_AS(fit_echo(synthetic(linspace(6e-3, 7e-3, 21), truth), 4e-3), ConfigError);
}

TEST_CASE("noiseless visibility decays are recovered exactly")
{
  std::vector<VisibilityPoint> pts;
  for (double tau : {1e-3, 2e-3, 4e-3, 8e-3, 12e-3, 20e-3}) { pts.push_back({tau, 0.92 * std::exp(-0.5 * 150.0 * 150.0 * tau * tau), 0.0}); }
  auto const g = fit_visibility_decay(pts, VisibilityModelKind::gaussian_sigma);
  CHECK(g.value("V0") == doctest::Approx(0.92).epsilon(1e-6));
  CHECK(g.value("sigma") == doctest::Approx(150.0).epsilon(1e-6));
  CHECK(g.value("decay_time") == doctest::Approx(std::sqrt(2.0) / 150.0).epsilon(1e-6));
  CHECK(evaluate_fit(g, 5e-3) == doctest::Approx(0.92 * std::exp(-0.5 * 150.0 * 150.0 * 25e-6)).epsilon(1e-6));

  VisibilityModel ref;
  ref.delta0 = -two_pi * 3e3;
  ref.allan = white_plus_floor(0.0005, 0.1, 0.003);
  auto truth = ref;
  truth.sigma_scale = 1.7;
  truth.V0 = 0.95;
  pts.clear();
  for (double tau : {1e-3, 3e-3, 6e-3, 10e-3, 15e-3, 20e-3}) { pts.push_back({tau, echo_visibility(tau, truth), 0.0}); }
  auto const a = fit_visibility_decay(pts, VisibilityModelKind::allan_curve, &ref);
  CHECK(a.value("V0") == doctest::Approx(0.95).epsilon(1e-6));
  CHECK(a.value("scale") == doctest::Approx(1.7).epsilon(1e-6));
  CHECK_THROWS_AS(fit_visibility_decay(pts, VisibilityModelKind::allan_curve), ConfigError);
  pts.resize(3);
  CHECK_THROWS_AS(fit_visibility_decay(pts, VisibilityModelKind::gaussian_sigma), ConfigError);
}

TEST_CASE("fringe frequency estimate")
{
  auto const t = linspace(0, 2e-3, 81);
  std::vector<double> y;
  for (double x : t) { y.push_back(0.5 + 0.3 * std::cos(two_pi * 3e3 * x + 1.0)); }
  auto const e = estimate_fringe_frequency(t, y);
  CHECK_FALSE(e.degenerate);
  CHECK(std::abs(e.omega - two_pi * 3e3) <= two_pi / 2e-3 / 4);
  auto const flat = estimate_fringe_frequency(t, std::vector<double>(t.size(), 0.4));
  CHECK(flat.degenerate);
}

TEST_CASE("constant data gives a degenerate Ramsey fit")
{
  auto const d = synthetic(linspace(0, 2e-3, 41), [](double) { return 0.3; });
  auto const r = fit_ramsey(d);
  CHECK(r.degenerate);
  CHECK_FALSE(r.converged);
}

TEST_CASE("least-squares solution is stationary and reproducible")
{
  auto const t = linspace(0, 3, 40);
  std::vector<double> y;
  auto rng = rng_stream(5, 0, 0, 0);
  std::normal_distribution<double> g(0.0, 0.02);
  for (double x : t) { y.push_back(1.3 * std::exp(-0.7 * x) + 0.1 + g(rng)); }
  ResidualFunction f = [&](Eigen::VectorXd const &p, Eigen::VectorXd &r) {
    for (std::size_t i = 0; i < t.size(); ++i) { r[static_cast<Eigen::Index>(i)] = p[0] * std::exp(-p[1] * t[i]) + p[2] - y[i]; }
  };
  Eigen::VectorXd p0(3);
  p0 << 1.0, 1.0, 0.0;
  auto const a = levenberg_marquardt(f, p0, 40);
  REQUIRE(a.converged);
  // Gradient J^T r vanishes at the minimum.
  Eigen::VectorXd const grad = a.jacobian.transpose() * a.residuals;
  CHECK(grad.norm() < 1e-6 * a.jacobian.norm() * a.residuals.norm());
  // Restarting from the solution stays there.
  auto const b = levenberg_marquardt(f, a.params, 40);
  CHECK((b.params - a.params).norm() < 1e-9 * a.params.norm());
  // Covariance against the linearized formula.
  double const dof = 40 - 3;
  Eigen::MatrixXd const cov = (a.jacobian.transpose() * a.jacobian).inverse() * (a.cost / dof);
  CHECK((cov - a.covariance).norm() < 1e-3 * cov.norm());
  CHECK(std::sqrt(a.cost / dof) == doctest::Approx(0.02).epsilon(0.3));
}

TEST_CASE("parameter errors grow with the noise level")
{
  double const w = two_pi * 3e3;
  auto const truth = [&](double t) { return ramsey_model(t, 0.3, 0.32, 0.86e-3, w, 0.0, LineshapeForm::rounded); };
  double previous = 0.0;
  for (double noise : {0.005, 0.01, 0.02, 0.04}) {
    auto const r = fit_ramsey(synthetic(linspace(0, 2e-3, 81), truth, noise, 17), LineshapeForm::rounded);
    REQUIRE(r.converged);
    CHECK(r.error("T2_star") > previous);
    CHECK(std::abs(r.value("T2_star") - 0.86e-3) < 5 * r.error("T2_star"));
    previous = r.error("T2_star");
  }
}

TEST_CASE("visibility helpers")
{
  CHECK(visibility_from_center(0.0, 0.6) == 1.0);
  CHECK(visibility_from_center(0.3, 0.6) == doctest::Approx(0.0));
  CHECK(visibility_from_center(0.15, 0.6) == doctest::Approx(0.5));
  DataSet d;
  d.points = {{0, 0.1, 0, 0, 0}, {1, 0.5, 0, 0, 0}, {2, 0.3, 0, 0, 0}};
  CHECK(visibility_peak_to_peak(d, 0.8) == doctest::Approx(0.5));

  VisibilityModel best, worst;
  best.delta0 = worst.delta0 = -two_pi * 3e3;
  best.allan = white_plus_floor(0.0, 0.1, 0.003);
  worst.allan = white_plus_floor(0.0, 0.1, 0.009);
  std::vector<double> taus{1e-3, 5e-3, 10e-3, 20e-3};
  auto const band = visibility_band(taus, best, worst);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    CHECK(band.upper[i] >= band.lower[i]);
    CHECK(band.contains(taus[i], 0.5 * (band.upper[i] + band.lower[i])));
  }
  // Between grid points the edges are interpolated linearly.
  auto const fine = visibility_band(linspace(1e-3, 20e-3, 400), best, worst);
  CHECK(fine.contains(7e-3, echo_visibility(7e-3, best) - 1e-4));
  CHECK_FALSE(fine.contains(7e-3, echo_visibility(7e-3, best) + 0.01));
  CHECK_FALSE(band.contains(30e-3, 0.5));
}

TEST_CASE("fit results and visibility tables round-trip")
{
  FitResult f;
  f.model = "ramsey";
  f.form = "exact";
  f.converged = true;
  f.iterations = 12;
  f.reduced_chi2 = 1.1;
  f.parameters = {{"amplitude", 0.3, 0.01}, {"offset", 0.32, 0.002}, {"T2_star", 0.86e-3, 1.5e-5},
                  {"fringe_frequency", 18849.555921538759, 3.1}, {"phase", 0.1, 0.02}};
  std::stringstream ss;
  write_fit_result(ss, f);
  auto const g = read_fit_result(ss);
  CHECK(g.model == f.model);
  CHECK(g.form == f.form);
  CHECK(g.converged);
  REQUIRE(g.parameters.size() == f.parameters.size());
  for (std::size_t i = 0; i < f.parameters.size(); ++i) {
    CHECK(g.parameters[i].name == f.parameters[i].name);
    CHECK(g.parameters[i].value == f.parameters[i].value);
    CHECK(g.parameters[i].error == f.parameters[i].error);
  }
  CHECK(evaluate_fit(g, 1e-3) == evaluate_fit(f, 1e-3));
  CHECK_THROWS_AS(g.value("nope"), ConfigError);

  std::stringstream bad("{\"model\": 3}");
  CHECK_THROWS_AS(read_fit_result(bad), ConfigError);

  std::vector<VisibilityPoint> const pts{{1e-3, 0.9, 0.01}, {2e-3, 0.8, 0.02}};
  std::stringstream sv;
  write_visibility(sv, pts);
  auto const back = read_visibility(sv);
  REQUIRE(back.size() == 2);
  CHECK(back[1].tau_pi == pts[1].tau_pi);
  CHECK(back[1].V == pts[1].V);
  CHECK(back[1].error == pts[1].error);
}

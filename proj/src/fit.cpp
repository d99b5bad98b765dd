#include "conveyor/fit.hpp"

#include "conveyor/csv.hpp"
#include "conveyor/errors.hpp"
#include "conveyor/units.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

namespace conveyor {

Eigen::MatrixXd numeric_jacobian(ResidualFunction const &f, Eigen::VectorXd const &p, Eigen::VectorXd const &r0)
{
  Eigen::MatrixXd J(r0.size(), p.size());
  Eigen::VectorXd q = p;
  Eigen::VectorXd r(r0.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    double const h = std::max(1e-8, 1e-6 * std::abs(p[j]));
    q[j] = p[j] + h;
    f(q, r);
    J.col(j) = (r - r0) / h;
    q[j] = p[j];
  }
  return J;
}

LmResult levenberg_marquardt(ResidualFunction const &f, Eigen::VectorXd p0, Eigen::Index n_residuals,
                             LmOptions const &options)
{
  Eigen::Index const n = p0.size();
  LmResult out;
  out.params = std::move(p0);
  out.residuals.resize(n_residuals);
  f(out.params, out.residuals);
  out.cost = out.residuals.squaredNorm();
  if (!std::isfinite(out.cost)) { throw NumericError("residuals are not finite at the starting point"); }

  double lambda = options.initial_lambda;
  Eigen::VectorXd trial_r(n_residuals);
  out.jacobian = numeric_jacobian(f, out.params, out.residuals);
  while (out.iterations < options.max_iterations) {
    ++out.iterations;
    Eigen::MatrixXd const JtJ = out.jacobian.transpose() * out.jacobian;
    Eigen::VectorXd const g = out.jacobian.transpose() * out.residuals;
    Eigen::MatrixXd A = JtJ;
    A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-300);
    Eigen::VectorXd const step = A.ldlt().solve(-g);
    Eigen::VectorXd const trial = out.params + step;
    f(trial, trial_r);
    double const trial_cost = trial_r.squaredNorm();
    if (std::isfinite(trial_cost) && trial_cost < out.cost) {
      double const dp = step.norm() / std::max(out.params.norm(), 1e-300);
      double const df = (std::sqrt(out.cost) - std::sqrt(trial_cost)) / std::max(std::sqrt(out.cost), 1e-300);
      out.params = trial;
      out.residuals = trial_r;
      out.cost = trial_cost;
      out.jacobian = numeric_jacobian(f, out.params, out.residuals);
      lambda = std::max(lambda / 10.0, 1e-15);
      if (dp < options.xtol || df < options.ftol) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e16) {
        // No descent direction left at working precision.
        out.converged = true;
        break;
      }
    }
  }

  Eigen::MatrixXd const JtJ = out.jacobian.transpose() * out.jacobian;
  Eigen::Index const dof = n_residuals - n;
  double const scale = dof > 0 ? out.cost / static_cast<double>(dof) : 1.0;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(JtJ);
  out.covariance = cod.pseudoInverse() * scale;
  return out;
}

// ---------------------------------------------------------------------------

bool FitResult::has(std::string const &name) const
{
  return std::any_of(parameters.begin(), parameters.end(), [&](auto const &p) { return p.name == name; });
}

double FitResult::value(std::string const &name) const
{
  for (auto const &p : parameters) {
    if (p.name == name) { return p.value; }
  }
  throw ConfigError("fit result has no parameter '" + name + "'");
}

double FitResult::error(std::string const &name) const
{
  for (auto const &p : parameters) {
    if (p.name == name) { return p.error; }
  }
  throw ConfigError("fit result has no parameter '" + name + "'");
}

FrequencyEstimate estimate_fringe_frequency(std::vector<double> const &t, std::vector<double> const &y)
{
  if (t.size() != y.size() || t.size() < 8) { throw ConfigError("frequency estimate needs at least 8 points"); }
  double const mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double var = 0.0;
  for (double v : y) { var += (v - mean) * (v - mean); }
  if (var <= 1e-24 * static_cast<double>(y.size())) { return {0.0, true}; }

  std::vector<double> spacing;
  for (std::size_t i = 1; i < t.size(); ++i) { spacing.push_back(t[i] - t[i - 1]); }
  std::nth_element(spacing.begin(), spacing.begin() + static_cast<std::ptrdiff_t>(spacing.size() / 2), spacing.end());
  double const median = spacing[spacing.size() / 2];
  double const span = t.back() - t.front();
  if (!(median > 0.0) || !(span > 0.0)) { throw ConfigError("degenerate time grid"); }

  double const nyquist = std::numbers::pi / median;
  double const d_omega = two_pi / span / 4.0;
  double best_power = -1.0;
  double best_omega = 0.0;
  for (double w = d_omega; w <= nyquist * (1 + 1e-12); w += d_omega) {
    std::complex<double> sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) { sum += (y[i] - mean) * std::polar(1.0, -w * t[i]); }
    double const power = std::norm(sum);
    if (power > best_power) {
      best_power = power;
      best_omega = w;
    }
  }
  return {best_omega, false};
}

FrequencyEstimate estimate_fringe_frequency(DataSet const &data) { return estimate_fringe_frequency(data.xs(), data.p3()); }

double ramsey_model(double t, double amplitude, double offset, double t2_star, double omega, double phase,
                    LineshapeForm form)
{
  LightShiftDistribution const dist{-1.0, std::abs(t2_star) / t2_star_per_K};
  if (form == LineshapeForm::rounded) { return offset + amplitude * ramsey_envelope(t, dist) * std::cos(omega * t + phase); }
  return offset + amplitude * exact_envelope(t, dist) * std::cos(omega * t + phase + chirp_phase(t, dist));
}

double echo_model(double t, double amplitude, double offset, double t2_star, double omega, double phase,
                  double center, LineshapeForm form)
{
  double const s = t - center;
  LightShiftDistribution const dist{-1.0, std::abs(t2_star) / t2_star_per_K};
  if (form == LineshapeForm::rounded) {
    return offset - amplitude * ramsey_envelope(std::abs(s), dist) * std::cos(omega * s + phase);
  }
  return offset - amplitude * exact_envelope(s, dist) * std::cos(omega * s + phase + chirp_phase(s, dist));
}

namespace {

struct Series
{
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> sigma;
};

// Binomial standard errors, floored at half a count so that points with
// P3 = 0 or 1 keep a finite weight. Synthetic data without counts is unweighted.
Series weighted_series(DataSet const &data)
{
  Series s;
  for (auto const &p : data.points) {
    s.t.push_back(p.x);
    s.y.push_back(p.p3_mean);
    double sigma = 1.0;
    if (p.n_initial > 0) { sigma = std::max(p.p3_stderr, 0.5 / static_cast<double>(p.n_initial)); }
    s.sigma.push_back(sigma);
  }
  return s;
}

double wrap_phase(double phi)
{
  phi = std::remainder(phi, two_pi);
  if (phi <= -std::numbers::pi) { phi += two_pi; }
  return phi;
}

// Rough 1/e time of the oscillation amplitude from chunked min/max.
double envelope_guess(Series const &s)
{
  std::size_t const chunks = std::min<std::size_t>(8, s.t.size() / 2);
  std::size_t const per = s.t.size() / chunks;
  double first = -1.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    auto const b = s.y.begin() + static_cast<std::ptrdiff_t>(c * per);
    auto const e = c + 1 == chunks ? s.y.end() : b + static_cast<std::ptrdiff_t>(per);
    auto const [lo, hi] = std::minmax_element(b, e);
    double const amp = 0.5 * (*hi - *lo);
    if (c == 0) {
      first = amp;
    } else if (amp < first / std::numbers::e) {
      return s.t[c * per + per / 2] - s.t.front();
    }
  }
  return s.t.back() - s.t.front();
}

FitResult finish(std::string model, LineshapeForm form, std::vector<std::string> const &names, LmResult const &lm,
                 std::size_t n_points)
{
  FitResult r;
  r.model = std::move(model);
  r.form = form == LineshapeForm::rounded ? "rounded" : "exact";
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto const j = static_cast<Eigen::Index>(i);
    r.parameters.push_back({names[i], lm.params[j], std::sqrt(std::max(0.0, lm.covariance(j, j)))});
  }
  r.residual_norm = std::sqrt(lm.cost);
  r.reduced_chi2 = n_points > names.size() ? lm.cost / static_cast<double>(n_points - names.size()) : 0.0;
  r.converged = lm.converged;
  r.iterations = lm.iterations;
  if (!r.converged) { r.message = "iteration cap reached; parameters unreliable"; }
  return r;
}

} // namespace

FitResult fit_ramsey(DataSet const &data, LineshapeForm form, LmOptions const &options)
{
  if (data.points.size() < 8) { throw ConfigError("Ramsey fit needs at least 8 points"); }
  auto const s = weighted_series(data);
  auto const freq = estimate_fringe_frequency(s.t, s.y);
  if (freq.degenerate) {
    FitResult r;
    r.model = "ramsey";
    r.form = form == LineshapeForm::rounded ? "rounded" : "exact";
    r.degenerate = true;
    r.message = "data are constant; no fringe to fit";
    return r;
  }
  auto const n = static_cast<Eigen::Index>(s.t.size());
  ResidualFunction f = [&](Eigen::VectorXd const &p, Eigen::VectorXd &r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto const k = static_cast<std::size_t>(i);
      r[i] = (ramsey_model(s.t[k], p[0], p[1], p[2], p[3], p[4], form) - s.y[k]) / s.sigma[k];
    }
  };
  auto const [lo, hi] = std::minmax_element(s.y.begin(), s.y.end());
  double const offset0 = std::accumulate(s.y.begin(), s.y.end(), 0.0) / static_cast<double>(s.y.size());
  double const amp0 = 0.5 * (*hi - *lo);
  double const t2_0 = std::max(envelope_guess(s), 1e-12);

  LmResult best;
  bool have = false;
  for (double phase0 : {0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi}) {
    Eigen::VectorXd p0(5);
    p0 << amp0, offset0, t2_0, freq.omega, phase0;
    auto lm = levenberg_marquardt(f, p0, n, options);
    if (!have || lm.cost < best.cost) {
      best = std::move(lm);
      have = true;
    }
  }
  best.params[2] = std::abs(best.params[2]);
  if (best.params[0] < 0.0) {
    best.params[0] = -best.params[0];
    best.params[4] += std::numbers::pi;
  }
  if (form == LineshapeForm::rounded && best.params[3] < 0.0) {
    best.params[3] = -best.params[3];
    best.params[4] = -best.params[4];
  }
  best.params[4] = wrap_phase(best.params[4]);
  return finish("ramsey", form, {"amplitude", "offset", "T2_star", "fringe_frequency", "phase"}, best, s.t.size());
}

FitResult fit_echo(DataSet const &data, double tau_pi, LineshapeForm form, double achievable_max,
                   LmOptions const &options)
{
  if (data.points.size() < 8) { throw ConfigError("echo fit needs at least 8 points"); }
  auto const s = weighted_series(data);
  double const center0 = 2.0 * tau_pi;
  if (s.t.front() > center0 || s.t.back() < center0) { throw ConfigError("echo scan must bracket t = 2 tau_pi"); }
  auto const freq = estimate_fringe_frequency(s.t, s.y);
  if (freq.degenerate) {
    FitResult r;
    r.model = "echo";
    r.form = form == LineshapeForm::rounded ? "rounded" : "exact";
    r.degenerate = true;
    r.message = "data are constant; no echo to fit";
    return r;
  }
  auto const n = static_cast<Eigen::Index>(s.t.size());
  ResidualFunction f = [&](Eigen::VectorXd const &p, Eigen::VectorXd &r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto const k = static_cast<std::size_t>(i);
      r[i] = (echo_model(s.t[k], p[0], p[1], p[2], p[3], p[4], p[5], form) - s.y[k]) / s.sigma[k];
    }
  };
  auto const [lo, hi] = std::minmax_element(s.y.begin(), s.y.end());
  double const offset0 = std::accumulate(s.y.begin(), s.y.end(), 0.0) / static_cast<double>(s.y.size());
  double const amp0 = 0.5 * (*hi - *lo);
  double const t2_0 = 0.25 * (s.t.back() - s.t.front());

  LmResult best;
  bool have = false;
  for (double phase0 : {0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi}) {
    Eigen::VectorXd p0(6);
    p0 << amp0, offset0, t2_0, freq.omega, phase0, center0;
    auto lm = levenberg_marquardt(f, p0, n, options);
    if (!have || lm.cost < best.cost) {
      best = std::move(lm);
      have = true;
    }
  }
  best.params[2] = std::abs(best.params[2]);
  if (best.params[0] < 0.0) {
    best.params[0] = -best.params[0];
    best.params[4] += std::numbers::pi;
  }
  if (form == LineshapeForm::rounded && best.params[3] < 0.0) {
    best.params[3] = -best.params[3];
    best.params[4] = -best.params[4];
  }
  best.params[4] = wrap_phase(best.params[4]);
  auto r = finish("echo", form, {"amplitude", "offset", "T2_star", "fringe_frequency", "phase", "center"}, best,
                  s.t.size());
  r.parameters.push_back({"tau_pi", 0.5 * r.value("center"), 0.5 * r.error("center")});
  r.parameters.push_back({"visibility", 2.0 * r.value("amplitude") / achievable_max,
                          2.0 * r.error("amplitude") / achievable_max});
  return r;
}

FitResult fit_visibility_decay(std::vector<VisibilityPoint> const &points, VisibilityModelKind kind,
                               VisibilityModel const *reference, LmOptions const &options)
{
  if (points.size() < 4) { throw ConfigError("visibility fit needs at least 4 points"); }
  if (kind == VisibilityModelKind::allan_curve && !reference) {
    throw ConfigError("allan-curve visibility fit needs a reference noise model");
  }
  auto const n = static_cast<Eigen::Index>(points.size());
  auto model = [&](double tau, Eigen::VectorXd const &p) {
    if (kind == VisibilityModelKind::gaussian_sigma) { return p[0] * std::exp(-0.5 * p[1] * p[1] * tau * tau); }
    if (tau == 0.0) { return p[0]; }
    double const x = p[1] * reference->sigma_A(tau) * reference->delta0 * tau;
    return p[0] * std::exp(-x * x);
  };
  ResidualFunction f = [&](Eigen::VectorXd const &p, Eigen::VectorXd &r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto const &pt = points[static_cast<std::size_t>(i)];
      double const sigma = pt.error > 0.0 ? pt.error : 1.0;
      r[i] = (model(pt.tau_pi, p) - pt.V) / sigma;
    }
  };

  double const v0 = std::max_element(points.begin(), points.end(), [](auto const &a, auto const &b) {
                      return a.V < b.V;
                    })->V;
  // Initial decay scale from the point closest to V0/e.
  double tau_e = points.back().tau_pi;
  for (auto const &pt : points) {
    if (pt.V < v0 / std::numbers::e) {
      tau_e = pt.tau_pi;
      break;
    }
  }
  Eigen::VectorXd p0(2);
  if (kind == VisibilityModelKind::gaussian_sigma) {
    p0 << v0, std::sqrt(2.0) / std::max(tau_e, 1e-12);
  } else {
    double const base = reference->sigma_A(tau_e) * std::abs(reference->delta0) * tau_e;
    p0 << v0, base > 0.0 ? 1.0 / base : 1.0;
  }
  auto lm = levenberg_marquardt(f, p0, n, options);
  lm.params[1] = std::abs(lm.params[1]);
  auto r = finish(kind == VisibilityModelKind::gaussian_sigma ? "visibility-gaussian" : "visibility-allan",
                  LineshapeForm::rounded, {"V0", kind == VisibilityModelKind::gaussian_sigma ? "sigma" : "scale"}, lm,
                  points.size());
  r.form = "-";
  if (kind == VisibilityModelKind::gaussian_sigma) {
    double const sigma = r.value("sigma");
    r.parameters.push_back({"decay_time", sigma > 0.0 ? std::sqrt(2.0) / sigma : 0.0,
                            sigma > 0.0 ? std::sqrt(2.0) * r.error("sigma") / (sigma * sigma) : 0.0});
  }
  return r;
}

bool VisibilityBand::contains(double tau, double V) const
{
  if (tau_pi.empty() || tau < tau_pi.front() || tau > tau_pi.back()) { return false; }
  auto it = std::lower_bound(tau_pi.begin(), tau_pi.end(), tau);
  auto const i = static_cast<std::size_t>(it - tau_pi.begin());
  if (tau_pi[i] == tau) { return V <= upper[i] && V >= lower[i]; }
  double const f = (tau - tau_pi[i - 1]) / (tau_pi[i] - tau_pi[i - 1]);
  double const hi = upper[i - 1] + f * (upper[i] - upper[i - 1]);
  double const lo = lower[i - 1] + f * (lower[i] - lower[i - 1]);
  return V <= hi && V >= lo;
}

VisibilityBand visibility_band(std::vector<double> const &tau_pi, VisibilityModel const &best,
                               VisibilityModel const &worst)
{
  VisibilityBand band;
  for (double tau : tau_pi) {
    double const a = echo_visibility(tau, best);
    double const b = echo_visibility(tau, worst);
    band.tau_pi.push_back(tau);
    band.upper.push_back(std::max(a, b));
    band.lower.push_back(std::min(a, b));
  }
  return band;
}

double visibility_peak_to_peak(DataSet const &data, double achievable_max)
{
  auto const y = data.p3();
  if (y.empty()) { throw ConfigError("empty data set"); }
  auto const [lo, hi] = std::minmax_element(y.begin(), y.end());
  return (*hi - *lo) / achievable_max;
}

double visibility_from_center(double p3_center, double achievable_max) { return 1.0 - 2.0 * p3_center / achievable_max; }

// ---------------------------------------------------------------------------

void write_fit_result(std::ostream &out, FitResult const &fit)
{
  nlohmann::ordered_json j;
  j["model"] = fit.model;
  j["form"] = fit.form;
  j["converged"] = fit.converged;
  j["degenerate"] = fit.degenerate;
  j["iterations"] = fit.iterations;
  j["residual_norm"] = fit.residual_norm;
  j["reduced_chi2"] = fit.reduced_chi2;
  j["message"] = fit.message;
  auto &params = j["parameters"] = nlohmann::ordered_json::array();
  for (auto const &p : fit.parameters) { params.push_back({{"name", p.name}, {"value", p.value}, {"error", p.error}}); }
  out << j.dump(2) << '\n';
}

FitResult read_fit_result(std::istream &in)
{
  nlohmann::json j;
  try {
    in >> j;
    FitResult fit;
    fit.model = j.at("model").get<std::string>();
    fit.form = j.at("form").get<std::string>();
    fit.converged = j.at("converged").get<bool>();
    fit.degenerate = j.value("degenerate", false);
    fit.iterations = j.value("iterations", 0);
    fit.residual_norm = j.value("residual_norm", 0.0);
    fit.reduced_chi2 = j.value("reduced_chi2", 0.0);
    fit.message = j.value("message", std::string{});
    for (auto const &p : j.at("parameters")) {
      fit.parameters.push_back({p.at("name").get<std::string>(), p.at("value").get<double>(), p.at("error").get<double>()});
    }
    return fit;
  } catch (nlohmann::json::exception const &e) {
    throw ConfigError(std::string("malformed fit result: ") + e.what());
  }
}

double evaluate_fit(FitResult const &fit, double x)
{
  auto const form = fit.form == "exact" ? LineshapeForm::exact : LineshapeForm::rounded;
  auto v = [&](char const *name) { return fit.value(name); };
  if (fit.model == "ramsey") {
    return ramsey_model(x, v("amplitude"), v("offset"), v("T2_star"), v("fringe_frequency"), v("phase"), form);
  }
  if (fit.model == "echo") {
    return echo_model(x, v("amplitude"), v("offset"), v("T2_star"), v("fringe_frequency"), v("phase"), v("center"),
                      form);
  }
  if (fit.model == "visibility-gaussian") { return v("V0") * std::exp(-0.5 * v("sigma") * v("sigma") * x * x); }
  throw ConfigError("cannot evaluate a '" + fit.model + "' fit without its reference model");
}

void write_visibility(std::ostream &out, std::vector<VisibilityPoint> const &points)
{
  out << "tau_pi_s,V,V_err\n";
  for (auto const &p : points) { out << csv::format(p.tau_pi) << ',' << csv::format(p.V) << ',' << csv::format(p.error) << '\n'; }
}

std::vector<VisibilityPoint> read_visibility(std::istream &in)
{
  auto const table = csv::read(in);
  auto const ct = table.column("tau_pi_s");
  auto const cv = table.column("V");
  auto const ce = table.column("V_err");
  std::vector<VisibilityPoint> out;
  for (auto const &row : table.rows) { out.push_back({row[ct], row[cv], row[ce]}); }
  return out;
}

} // namespace conveyor

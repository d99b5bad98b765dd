#pragma once

#include "conveyor/allan.hpp"
#include "conveyor/dephasing.hpp"
#include "conveyor/shot_simulator.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace conveyor {

// Damped Gauss-Newton with a Levenberg damping schedule: lambda starts at 1e-3,
// x10 after a rejected step and /10 after an accepted one. Forward-difference
// Jacobian with step max(1e-8, 1e-6 |p|). Stops when the relative parameter
// change drops below xtol or the relative residual-norm change below ftol.
struct LmOptions
{
  int max_iterations = 200;
  double initial_lambda = 1e-3;
  double xtol = 1e-10;
  double ftol = 1e-12;
};

using ResidualFunction = std::function<void(Eigen::VectorXd const &params, Eigen::VectorXd &residuals)>;

struct LmResult
{
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd covariance; // (J^T J)^-1 scaled by the reduced chi-square
  double cost = 0.0;          // sum of squared residuals
  int iterations = 0;
  bool converged = false;
};

LmResult levenberg_marquardt(ResidualFunction const &f, Eigen::VectorXd p0, Eigen::Index n_residuals,
                             LmOptions const &options = {});

Eigen::MatrixXd numeric_jacobian(ResidualFunction const &f, Eigen::VectorXd const &p, Eigen::VectorXd const &r0);

struct FitParameter
{
  std::string name;
  double value = 0.0;
  double error = 0.0;
};

struct FitResult
{
  std::string model;
  std::string form;
  std::vector<FitParameter> parameters;
  double residual_norm = 0.0;
  double reduced_chi2 = 0.0;
  bool converged = false;
  bool degenerate = false;
  int iterations = 0;
  std::string message;

  bool has(std::string const &name) const;
  double value(std::string const &name) const;
  double error(std::string const &name) const;
};

struct FrequencyEstimate
{
  double omega = 0.0; // rad/s
  bool degenerate = false;
};

// Dominant nonzero angular frequency of the mean-subtracted P3 series from a
// periodogram evaluated on a frequency grid four times finer than 2 pi / span,
// up to the Nyquist limit of the median spacing.
FrequencyEstimate estimate_fringe_frequency(DataSet const &data);
FrequencyEstimate estimate_fringe_frequency(std::vector<double> const &t, std::vector<double> const &y);

// P3(t) = offset + amplitude * alpha(t) cos(omega t + phase)   (rounded)
// P3(t) = offset + amplitude * |chi(t)| cos(omega t + phase + chirp(t))   (exact)
double ramsey_model(double t, double amplitude, double offset, double t2_star, double omega, double phase,
                    LineshapeForm form);

// P3(t) = offset - amplitude * alpha(t - c) cos(omega (t - c) + phase), c = 2 tau_pi
double echo_model(double t, double amplitude, double offset, double t2_star, double omega, double phase,
                  double center, LineshapeForm form);

// Parameters: amplitude, offset, T2_star, fringe_frequency, phase.
FitResult fit_ramsey(DataSet const &data, LineshapeForm form = LineshapeForm::rounded, LmOptions const &options = {});

// Parameters: amplitude, offset, T2_star, fringe_frequency, phase, center, plus
// derived visibility = 2 amplitude / achievable_max and tau_pi = center / 2.
FitResult fit_echo(DataSet const &data, double tau_pi, LineshapeForm form = LineshapeForm::rounded,
                   double achievable_max = 1.0, LmOptions const &options = {});

struct VisibilityPoint
{
  double tau_pi = 0.0; // s
  double V = 0.0;
  double error = 0.0; // standard error; 0 means unweighted
};

enum class VisibilityModelKind
{
  allan_curve,    // V0 exp[-(scale sigma_A(tau))^2 delta0^2 tau^2]; parameters V0, scale
  gaussian_sigma, // V0 exp[-sigma^2 tau^2 / 2]; parameters V0, sigma
};

// `reference` supplies delta0 and the Allan curve for the allan_curve model.
FitResult fit_visibility_decay(std::vector<VisibilityPoint> const &points, VisibilityModelKind kind,
                               VisibilityModel const *reference = nullptr, LmOptions const &options = {});

struct VisibilityBand
{
  std::vector<double> tau_pi;
  std::vector<double> upper;
  std::vector<double> lower;

  bool contains(double tau_pi, double V) const;
};

// Best/worst-case prediction band from two noise models.
VisibilityBand visibility_band(std::vector<double> const &tau_pi, VisibilityModel const &best,
                               VisibilityModel const &worst);

// Fringe contrast read off a scan: (max - min) / achievable_max.
double visibility_peak_to_peak(DataSet const &data, double achievable_max = 1.0);

// Visibility from P3 at the echo centre, for a perfectly normalized signal
// P3 = achievable_max (1 - V) / 2.
double visibility_from_center(double p3_center, double achievable_max = 1.0);

void write_fit_result(std::ostream &out, FitResult const &fit);
FitResult read_fit_result(std::istream &in);

// Model curve of a Ramsey, echo or Gaussian visibility fit at x (delay t or
// tau_pi). Throws ConfigError for models that need external inputs.
double evaluate_fit(FitResult const &fit, double x);

// CSV `tau_pi_s,V,V_err`.
void write_visibility(std::ostream &out, std::vector<VisibilityPoint> const &points);
std::vector<VisibilityPoint> read_visibility(std::istream &in);

} // namespace conveyor

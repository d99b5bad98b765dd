#pragma once

#include "conveyor/rng.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <variant>
#include <vector>

namespace conveyor {

// Beat-signal amplitude samples, normalized so the mean is about 1.
struct NoiseRecord
{
  double sample_period = 0.0; // s
  std::vector<double> samples;

  void validate() const;
  double duration() const { return sample_period * static_cast<double>(samples.size()); }
  // Copy scaled to unit mean.
  NoiseRecord normalized() const;
};

// Allan deviation versus averaging time.
struct AllanCurve
{
  std::vector<double> taus;    // s, strictly increasing
  std::vector<double> sigma_A; // relative amplitude deviation

  void validate() const;
  bool contains(double tau) const;
  // Log-log linear interpolation. Throws NumericError outside [taus.front(), taus.back()].
  double at(double tau) const;
};

// Non-overlapping adjacent-bin two-sample variance at averaging time tau.
// tau must be an integer multiple of the sample period and span at least two bins.
double allan_variance(NoiseRecord const &record, double tau);

AllanCurve allan_curve(NoiseRecord const &record, std::vector<double> const &taus);

// Averaging times 1, 2, 4, ... sample periods up to a quarter of the record.
std::vector<double> octave_taus(NoiseRecord const &record);

enum class NoiseKind
{
  white,
  random_walk,
  band_limited,
};

struct BeatNoiseSpec
{
  NoiseKind kind = NoiseKind::white;
  double target = 0.0;          // Allan deviation at reference_tau
  double reference_tau = 0.1;   // s
};

// Record whose Allan deviation at the reference time matches the target.
// Throws ConfigError if the record is shorter than 10 reference times or the
// target is negative; NumericError if the generated shape cannot reach it.
NoiseRecord synthesize_beat_record(BeatNoiseSpec const &spec, double duration, double sample_period, RngStream &rng);

// Gaussian detuning change between the two halves of an echo.
double sample_detuning_jump(double sigma, RngStream &rng);

using AllanFunction = std::function<double(double)>;

struct VisibilityModel
{
  double delta0 = 0.0; // rad/s
  double V0 = 1.0;
  std::variant<AllanCurve, AllanFunction> allan;
  double sigma_scale = 1.0; // multiplier on sigma_A, e.g. for misaligned beams

  void validate() const;
  double sigma_A(double tau) const;
  // Standard deviation sqrt(2) |delta0| sigma_A(tau_pi) of the detuning jump.
  double detuning_sigma(double tau_pi) const;
};

// V0 exp[-sigma_A(tau_pi)^2 delta0^2 tau_pi^2].
double echo_visibility(double tau_pi, VisibilityModel const &model);

// Allan function sqrt(white^2 * ref/tau + floor^2): a white-noise part
// that averages down plus a flicker floor.
AllanFunction white_plus_floor(double white_at_ref, double ref_tau, double floor);

NoiseRecord read_noise_record(std::istream &in);
NoiseRecord read_noise_record(std::filesystem::path const &path);
void write_noise_record(std::ostream &out, NoiseRecord const &record);
AllanCurve read_allan_curve(std::istream &in);
AllanCurve read_allan_curve(std::filesystem::path const &path);
void write_allan_curve(std::ostream &out, AllanCurve const &curve);

} // namespace conveyor

#include "conveyor/allan.hpp"

#include "conveyor/csv.hpp"
#include "conveyor/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

namespace conveyor {

void NoiseRecord::validate() const
{
  if (!(sample_period > 0.0) || !std::isfinite(sample_period)) {
    throw ValidationError("record.sample_period", "must be finite and positive");
  }
  if (samples.size() < 2) { throw ValidationError("record.samples", "need at least 2 samples"); }
  for (double x : samples) {
    if (!std::isfinite(x)) { throw ValidationError("record.samples", "all samples must be finite"); }
  }
}

NoiseRecord NoiseRecord::normalized() const
{
  validate();
  double const mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  if (mean == 0.0) { throw NumericError("cannot normalize a zero-mean record"); }
  NoiseRecord out{sample_period, samples};
  for (double &x : out.samples) { x /= mean; }
  return out;
}

void AllanCurve::validate() const
{
  if (taus.empty() || taus.size() != sigma_A.size()) { throw ValidationError("allan", "taus and sigma_A must match"); }
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) { throw ValidationError("allan.taus", "must be positive"); }
    if (i > 0 && !(taus[i] > taus[i - 1])) { throw ValidationError("allan.taus", "must be strictly increasing"); }
    if (!(sigma_A[i] >= 0.0)) { throw ValidationError("allan.sigma_A", "must be non-negative"); }
  }
}

bool AllanCurve::contains(double tau) const
{
  return !taus.empty() && tau >= taus.front() * (1 - 1e-12) && tau <= taus.back() * (1 + 1e-12);
}

double AllanCurve::at(double tau) const
{
  if (!contains(tau)) { throw NumericError("averaging time outside the Allan curve; extrapolation refused"); }
  if (taus.size() == 1) { return sigma_A.front(); }
  auto it = std::upper_bound(taus.begin(), taus.end(), tau);
  std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - taus.begin()), taus.size() - 1);
  std::size_t const lo = hi - 1;
  double const s0 = sigma_A[lo];
  double const s1 = sigma_A[hi];
  double const f = std::log(tau / taus[lo]) / std::log(taus[hi] / taus[lo]);
  if (s0 == 0.0 || s1 == 0.0) { return s0 + f * (s1 - s0); }
  return std::exp(std::log(s0) + f * std::log(s1 / s0));
}

namespace {

std::size_t bin_length(double sample_period, double tau)
{
  double const ratio = tau / sample_period;
  double const n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("averaging time must be an integer multiple of the sample period");
  }
  return static_cast<std::size_t>(n);
}

} // namespace

double allan_variance(NoiseRecord const &record, double tau)
{
  record.validate();
  std::size_t const n = bin_length(record.sample_period, tau);
  std::size_t const bins = record.samples.size() / n;
  if (bins < 2) { throw ConfigError("record too short for two bins at this averaging time"); }
  double prev = 0.0;
  double sum = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    auto const first = record.samples.begin() + static_cast<std::ptrdiff_t>(b * n);
    double const mean = std::accumulate(first, first + static_cast<std::ptrdiff_t>(n), 0.0) / static_cast<double>(n);
    if (b > 0) { sum += 0.5 * (mean - prev) * (mean - prev); }
    prev = mean;
  }
  return sum / static_cast<double>(bins - 1);
}

AllanCurve allan_curve(NoiseRecord const &record, std::vector<double> const &taus)
{
  AllanCurve curve;
  for (double tau : taus) {
    curve.taus.push_back(tau);
    curve.sigma_A.push_back(std::sqrt(allan_variance(record, tau)));
  }
  curve.validate();
  return curve;
}

std::vector<double> octave_taus(NoiseRecord const &record)
{
  std::vector<double> taus;
  for (std::size_t n = 1; 4 * n <= record.samples.size(); n *= 2) {
    taus.push_back(record.sample_period * static_cast<double>(n));
  }
  return taus;
}

NoiseRecord synthesize_beat_record(BeatNoiseSpec const &spec, double duration, double sample_period, RngStream &rng)
{
  if (!(spec.target >= 0.0) || !std::isfinite(spec.target)) { throw ConfigError("noise target must be non-negative"); }
  if (!(sample_period > 0.0)) { throw ConfigError("sample period must be positive"); }
  if (duration < 10.0 * spec.reference_tau * (1 - 1e-12)) {
    throw ConfigError("record must span at least 10 reference averaging times");
  }
  bin_length(sample_period, spec.reference_tau);
  auto const count = static_cast<std::size_t>(std::llround(duration / sample_period));
  NoiseRecord record{sample_period, std::vector<double>(count, 1.0)};
  if (spec.target == 0.0) { return record; }

  std::normal_distribution<double> gauss;
  std::vector<double> raw(count);
  switch (spec.kind) {
  case NoiseKind::white:
    for (double &x : raw) { x = gauss(rng); }
    break;
  case NoiseKind::random_walk: {
    double acc = 0.0;
    for (double &x : raw) { x = acc += gauss(rng); }
    break;
  }
  case NoiseKind::band_limited: {
    // First-order low-pass with its corner at twice the reference rate.
    double const rho = std::exp(-sample_period / (0.5 * spec.reference_tau));
    double const drive = std::sqrt(1.0 - rho * rho);
    double y = gauss(rng);
    for (double &x : raw) { x = y = rho * y + drive * gauss(rng); }
    break;
  }
  }
  double const mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(count);
  for (double &x : raw) { x -= mean; }

  NoiseRecord shape{sample_period, raw};
  double const reached = std::sqrt(allan_variance(shape, spec.reference_tau));
  if (!(reached > 0.0)) { throw NumericError("noise shape has no fluctuation at the reference time"); }
  double const scale = spec.target / reached;
  for (std::size_t i = 0; i < count; ++i) { record.samples[i] = 1.0 + scale * raw[i]; }
  if (*std::min_element(record.samples.begin(), record.samples.end()) <= 0.0) {
    throw NumericError("target fluctuation drives the beat amplitude negative for this noise kind");
  }
  double const check = std::sqrt(allan_variance(record, spec.reference_tau));
  if (std::abs(check - spec.target) > 0.2 * spec.target) { throw NumericError("synthesized record misses its target"); }
  return record;
}

double sample_detuning_jump(double sigma, RngStream &rng)
{
  if (!(sigma >= 0.0)) { throw ConfigError("detuning jump sigma must be non-negative"); }
  if (sigma == 0.0) { return 0.0; }
  std::normal_distribution<double> gauss(0.0, sigma);
  return gauss(rng);
}

void VisibilityModel::validate() const
{
  if (!(V0 >= 0.0 && V0 <= 1.0)) { throw ValidationError("noise.v0", "must lie in [0, 1]"); }
  if (!(sigma_scale >= 0.0)) { throw ValidationError("noise.scale", "must be non-negative"); }
  if (auto const *c = std::get_if<AllanCurve>(&allan)) { c->validate(); }
}

double VisibilityModel::sigma_A(double tau) const
{
  if (auto const *c = std::get_if<AllanCurve>(&allan)) { return sigma_scale * c->at(tau); }
  return sigma_scale * std::get<AllanFunction>(allan)(tau);
}

double VisibilityModel::detuning_sigma(double tau_pi) const
{
  if (tau_pi == 0.0) { return 0.0; }
  return std::sqrt(2.0) * std::abs(delta0) * sigma_A(tau_pi);
}

double echo_visibility(double tau_pi, VisibilityModel const &model)
{
  if (tau_pi == 0.0) { return model.V0; }
  double const s = model.sigma_A(tau_pi) * model.delta0 * tau_pi;
  return model.V0 * std::exp(-s * s);
}

AllanFunction white_plus_floor(double white_at_ref, double ref_tau, double floor)
{
  return [=](double tau) { return std::sqrt(white_at_ref * white_at_ref * ref_tau / tau + floor * floor); };
}

// ---------------------------------------------------------------------------

NoiseRecord read_noise_record(std::istream &in)
{
  auto const table = csv::read(in);
  auto const ct = table.column("time_s");
  auto const ca = table.column("amplitude");
  if (table.rows.size() < 2) { throw ConfigError("noise record needs at least 2 rows"); }
  NoiseRecord record;
  double const t0 = table.rows[0][ct];
  double const period = table.rows[1][ct] - t0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    double const expected = t0 + period * static_cast<double>(i);
    if (std::abs(table.rows[i][ct] - expected) > 1e-6 * period) {
      throw ConfigError("noise record must be uniformly sampled (row " + std::to_string(i + 1) + ")");
    }
    record.samples.push_back(table.rows[i][ca]);
  }
  record.sample_period = period;
  record.validate();
  return record;
}

NoiseRecord read_noise_record(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open " + path.string()); }
  return read_noise_record(in);
}

void write_noise_record(std::ostream &out, NoiseRecord const &record)
{
  out << "time_s,amplitude\n";
  for (std::size_t i = 0; i < record.samples.size(); ++i) {
    out << csv::format(record.sample_period * static_cast<double>(i)) << ',' << csv::format(record.samples[i]) << '\n';
  }
}

AllanCurve read_allan_curve(std::istream &in)
{
  auto const table = csv::read(in);
  auto const ct = table.column("tau_s");
  auto const cs = table.column("sigma_A");
  AllanCurve curve;
  for (auto const &row : table.rows) {
    curve.taus.push_back(row[ct]);
    curve.sigma_A.push_back(row[cs]);
  }
  curve.validate();
  return curve;
}

AllanCurve read_allan_curve(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open " + path.string()); }
  return read_allan_curve(in);
}

void write_allan_curve(std::ostream &out, AllanCurve const &curve)
{
  out << "tau_s,sigma_A\n";
  for (std::size_t i = 0; i < curve.taus.size(); ++i) {
    out << csv::format(curve.taus[i]) << ',' << csv::format(curve.sigma_A[i]) << '\n';
  }
}

} // namespace conveyor

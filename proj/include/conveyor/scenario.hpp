#pragma once

#include "conveyor/allan.hpp"
#include "conveyor/dephasing.hpp"
#include "conveyor/shot_simulator.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace conveyor {

inline constexpr int scenario_schema_version = 1;

// Serializable description of the homogeneous pointing noise. The visibility
// model is built from it once the trap (and hence delta0) is known.
struct NoiseSettings
{
  enum class Model
  {
    white_floor, // sqrt(white^2 ref/tau + floor^2)
    curve,       // tabulated Allan curve from a CSV file
  };
  Model model = Model::white_floor;
  double white = 0.0;          // Allan deviation of the white part at reference_tau
  double reference_tau = 0.1;  // s
  double floor = 0.0;
  std::string curve_path;      // relative paths resolve against the scenario file
  double scale = 1.0;          // multiplier used by the simulation
  double worst_scale = 1.0;    // multiplier of the pessimistic band edge
  double V0 = 1.0;
};

enum class AnalysisKind
{
  none,
  ramsey,
  echo,       // echo fringe at fixed tau_pi
  visibility, // echo centre vs tau_pi
};

struct AnalysisSettings
{
  AnalysisKind kind = AnalysisKind::none;
  LineshapeForm form = LineshapeForm::rounded;
  std::optional<double> achievable_max; // empty: derived from the loss model
};

struct RunSpec
{
  std::string name;
  ExperimentConfig experiment; // noise is filled in by experiment_config()
  std::optional<NoiseSettings> noise;
  AnalysisSettings analysis;
};

struct Scenario
{
  std::string name;
  std::string description;
  std::vector<RunSpec> runs;
  std::filesystem::path base_dir; // for relative paths, not serialized

  void validate() const;
};

// Full experiment configuration for a run, with the noise model attached.
ExperimentConfig experiment_config(RunSpec const &run, std::filesystem::path const &base_dir = {});
std::optional<VisibilityModel> visibility_model(RunSpec const &run, double scale,
                                                std::filesystem::path const &base_dir = {});

// Largest P3 an ideal fringe could reach given the loss channels of the run.
double achievable_max(RunSpec const &run);

// Text format: `key = value unit` lines grouped in [section] blocks, plus
// [run NAME] blocks whose `section.key` entries override the shared blocks.
// Schema violations throw ValidationError naming the key path and line.
Scenario parse_scenario(std::istream &in, std::string const &origin = "<scenario>");
Scenario load_scenario(std::filesystem::path const &path);
// Canonical SI form. parse_scenario(serialize_scenario(s)) reproduces s exactly.
std::string serialize_scenario(Scenario const &s);

struct PresetInfo
{
  std::string name;
  std::string summary;
};

std::vector<PresetInfo> preset_list();
// Preset source text; throws ConfigError for unknown names.
std::string preset_text(std::string const &name);
Scenario load_preset(std::string const &name);

} // namespace conveyor

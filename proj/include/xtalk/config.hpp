#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xtalk/compensation.hpp"
#include "xtalk/evaluation.hpp"
#include "xtalk/models.hpp"
#include "xtalk/ring_simulator.hpp"

namespace xtalk {

struct MeshSettings {
  double unit_length_mm = kDefaultUnitLengthMm;
  int rows = kDefaultMeshRows;
  int cols = kDefaultMeshCols;
};

struct OpticsSettings {
  double phase_offset = kDefaultPhaseOffset;      // rad
  std::optional<double> round_trip_amplitude;     // solved from the ER target when absent
};

struct SweepSettings {
  std::vector<std::size_t> sizes = kDefaultSweepSizes;
  std::size_t n_subsets = kDefaultSubsets;
  std::uint64_t seed = 6;
};

struct CompensationSettings {
  std::size_t n_samples = kDefaultCompensationSamples;
  std::uint64_t seed = 7;
};

struct ExperimentConfig {
  MeshSettings mesh;
  std::vector<std::string> rings = {"mrr1", "mrr2", "mrr3"};
  OpticsSettings optics;
  CrosstalkLaw ground_truth;
  NoiseSpec noise;
  DatasetOptions sampling;
  ModelSettings models;
  SweepSettings sweep;
  CompensationSettings compensation;
  std::string output_dir = "out";
};

// Throws ConfigError with the offending key.
void validate(const ExperimentConfig& cfg);

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

// Parses and validates; ConfigError messages carry file:line for both
// syntax errors and rejected values.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Replace every seed with one derived from `master`.
void override_seeds(ExperimentConfig& cfg, std::uint64_t master);

// Per-ring streams of the sampling and noise seeds.
std::uint64_t ring_stream(const std::string& ring_name);

}  // namespace xtalk

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xtalk/config.hpp"

namespace xtalk {

namespace fs = std::filesystem;

// Chip shared by every ring of one config: mesh plus ground-truth law.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const MeshTopology& mesh() const { return mesh_; }
  const GroundTruthCrosstalk& truth() const { return truth_; }

  RingBench bench(const std::string& ring) const;
  NoiseSpec noise_for(const std::string& ring) const;
  DatasetOptions sampling_for(const std::string& ring) const;

 private:
  ExperimentConfig cfg_;
  MeshTopology mesh_;
  GroundTruthCrosstalk truth_;
};

// Artifact layout below the output directory.
namespace artifacts {
fs::path dataset(const fs::path& out, const std::string& ring);
fs::path model(const fs::path& out, const std::string& ring, ModelKind kind);
fs::path fit_summary(const fs::path& out);
fs::path eval_summary(const fs::path& out);
fs::path lr_weights(const fs::path& out, const std::string& ring);
fs::path cross_eval(const fs::path& out);
fs::path sweep(const fs::path& out, const std::string& ring);
fs::path sweep_summary(const fs::path& out);
fs::path compensation(const fs::path& out);
fs::path compensation_summary(const fs::path& out);
fs::path report(const fs::path& out);
fs::path resolved_config(const fs::path& out);
}  // namespace artifacts

// Each command reads what earlier commands wrote under `out` and writes its
// own artifacts. Outputs depend only on the config.
void cmd_gen(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs,
             std::size_t dump_spectra = 0);
void cmd_fit(const ExperimentConfig& cfg, const fs::path& out, const std::vector<ModelKind>& kinds,
             unsigned jobs);
void cmd_eval(const ExperimentConfig& cfg, const fs::path& out);
CrossEvalMatrix cmd_cross_eval(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs);
void cmd_sweep(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs);
void cmd_compensate(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs);
std::string cmd_report(const fs::path& out);
void cmd_extract(const fs::path& spectra_dir, double fsr, const fs::path& samples_csv, unsigned jobs);
void cmd_run(const ExperimentConfig& cfg, const fs::path& out, unsigned jobs);

}  // namespace xtalk

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xtalk/ring_simulator.hpp"

namespace xtalk {

struct BetaParams {
  double v = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

// v = mean(1 - mean)/variance - 1, alpha = mean v, beta = (1 - mean) v.
BetaParams beta_params(double mean, double variance);

inline constexpr double kDefaultPhaseVariance = 0.05;
inline constexpr std::size_t kDefaultPortions = 20;

struct PhaseSamples {
  Eigen::MatrixXd phases;             // n_samples x n_pucs, rad in [0, 2pi]
  std::vector<std::size_t> portion;   // portion index of every sample
  std::vector<std::string> warnings;  // variance clamps
};

// Sample j belongs to portion j mod n_portions, so leftover samples land in
// the lowest portions. Portion k uses mean (k + 0.5)/n_portions of the per-PUC
// range; when the variance is infeasible there it is clamped to
// 0.9 mean(1 - mean) and a warning is recorded. Each sample draws from its own
// generator derived from (seed, j).
PhaseSamples sample_phase_vectors(std::size_t n_samples, std::size_t n_pucs,
                                  double variance = kDefaultPhaseVariance,
                                  std::size_t n_portions = kDefaultPortions,
                                  std::uint64_t seed = 0);

struct DatasetOptions {
  std::size_t n_samples = 5000;
  double variance = kDefaultPhaseVariance;
  std::size_t n_portions = kDefaultPortions;
  std::uint64_t sampling_seed = 3;
  std::uint64_t split_seed = 4;
  double train_fraction = 0.8;
};

void validate(const DatasetOptions& opts);

struct Dataset {
  std::string ring_id;
  std::vector<int> puc_ids;
  std::vector<double> distances;  // mm, aligned with puc_ids
  double fsr = kDefaultFsrPm;     // pm
  Eigen::MatrixXd phases;         // rad, one row per sample
  Eigen::VectorXd delta_lambda;   // pm
  Eigen::VectorXd corr1;
  Eigen::VectorXd corr2;
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending

  // provenance, echoed into the sidecar
  DatasetOptions options;
  NoiseSpec noise;
  std::vector<std::string> warnings;

  std::size_t size() const { return static_cast<std::size_t>(delta_lambda.size()); }
};

// Rows of a dataset, e.g. a split or a resampled subset.
struct SampleSet {
  Eigen::MatrixXd phases;
  Eigen::VectorXd delta_lambda;

  std::size_t size() const { return static_cast<std::size_t>(delta_lambda.size()); }
};

SampleSet select(const Dataset& ds, const std::vector<std::size_t>& rows);
inline SampleSet train_set(const Dataset& ds) { return select(ds, ds.train); }
inline SampleSet test_set(const Dataset& ds) { return select(ds, ds.test); }

// Seeded shuffle, first round(train_fraction n) rows train; both sorted.
void split_dataset(Dataset& ds, double train_fraction, std::uint64_t seed);

// Sample j is measured in slot 2j + 1 between zero-phase references in slots
// 2j and 2j + 2; the drift walk covers all 2n + 1 slots.
Dataset build_dataset(const RingBench& bench, const NoiseSpec& noise, const DatasetOptions& opts,
                      unsigned jobs = 0);

// <stem>.csv (sample_id, puc_<id>..., delta_lambda_pm, corr1, corr2, split)
// and <stem>.json (ring, ids, distances, seeds, noise).
void write_dataset(const std::filesystem::path& csv_path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& csv_path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace xtalk

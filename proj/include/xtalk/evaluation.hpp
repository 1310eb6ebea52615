#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xtalk/models.hpp"

namespace xtalk {

double rmse(std::span<const double> predictions, std::span<const double> truths);

// Linear interpolation between closest ranks: position q (n - 1) in the sorted data.
double percentile(std::span<const double> values, double q);

double mean(std::span<const double> v);
double population_std(std::span<const double> v);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

inline const std::vector<std::size_t> kDefaultSweepSizes = {50, 100, 200, 500, 1000, 2000, 4000};
inline constexpr std::size_t kDefaultSubsets = 20;

struct SweepPoint {
  std::size_t size = 0;
  double train_mean = 0.0;
  double train_std = 0.0;  // population std over subsets
  double test_mean = 0.0;
  double test_std = 0.0;
};

struct SizeSweepResult {
  ModelKind kind = ModelKind::Tpm;
  std::string ring_id;
  std::vector<SweepPoint> points;
};

// For each size, n_subsets with-replacement draws from the train split are
// fitted and scored on the fixed test split. Subset draws depend only on
// (seed, size, subset), so every model sees the same subsets.
SizeSweepResult size_sweep(const Dataset& ds, ModelKind kind,
                           const std::vector<std::size_t>& sizes = kDefaultSweepSizes,
                           std::size_t n_subsets = kDefaultSubsets, std::uint64_t seed = 6,
                           const ModelSettings& settings = {}, unsigned jobs = 0);

struct CrossEvalMatrix {
  std::vector<std::string> rings;
  std::vector<std::vector<double>> rmse;  // [evaluated m][trained n], pm
};

// models[n] is evaluated on the test split of datasets[m] using that ring's
// own PUC set and distances.
CrossEvalMatrix cross_eval(const std::vector<FittedModel>& models,
                           const std::vector<const Dataset*>& datasets, unsigned jobs = 0);

struct WeightRow {
  int puc_id = 0;
  double distance = 0.0;  // mm
  double weight = 0.0;    // pm/pi
};

struct WeightDiagnostics {
  std::vector<WeightRow> rows;  // ascending distance
  double spearman = 0.0;
};

WeightDiagnostics weight_distance_diagnostics(const LrParams& lr, std::span<const int> puc_ids,
                                              std::span<const double> distances);

}  // namespace xtalk

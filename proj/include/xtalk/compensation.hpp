#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xtalk/phase_sampling.hpp"

namespace xtalk {

inline constexpr std::size_t kLoopPucs = 6;
inline constexpr std::size_t kDefaultCompensationSamples = 6;

// -2 pi delta / fsr, rad.
double compensation_phase(double delta_pred_pm, double fsr_pm);

struct CompensationRecord {
  std::size_t sample_id = 0;     // row in the evaluated dataset
  double delta_meas = 0.0;       // pm, freshly measured
  double delta_pred = 0.0;       // pm
  double phi_comp = 0.0;         // rad
  double per_puc_phi = 0.0;      // rad, phi_comp / 6
  double delta_post_comp = 0.0;  // pm
};

using ShiftPredictor = std::function<double(std::span<const double> phases)>;

// `count` distinct rows of the test split, chosen with `seed`, ascending.
std::vector<std::size_t> pick_test_samples(const Dataset& ds, std::size_t count, std::uint64_t seed);

// Sample k uses slots 4k .. 4k+4: reference, measurement, reference,
// compensated measurement, reference (the last one shared with sample k+1).
// The six loop PUCs together
// add phi_comp of round-trip phase. Drift and amplitude noise are re-seeded
// from `seed` so they are independent of the dataset run.
std::vector<CompensationRecord> run_compensation(const RingBench& bench, const NoiseSpec& noise,
                                                 const ShiftPredictor& predictor,
                                                 const Dataset& ds,
                                                 const std::vector<std::size_t>& rows,
                                                 std::uint64_t seed, unsigned jobs = 0);

struct Quantiles {
  double p10 = 0.0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double p90 = 0.0;
};

Quantiles quantiles(std::span<const double> values);

struct BoxplotSummary {
  Quantiles delta_meas;
  Quantiles delta_pred;
  Quantiles delta_post_comp;
};

BoxplotSummary boxplot_summary(const std::vector<CompensationRecord>& records);

}  // namespace xtalk

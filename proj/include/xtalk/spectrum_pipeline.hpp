#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xtalk/spectrum.hpp"

namespace xtalk {

// Interpolating cubic spline on a uniform grid with not-a-knot ends.
class UniformCubicSpline {
 public:
  UniformCubicSpline(double step, std::span<const double> values);

  // x is measured from the first knot, in the same unit as `step`.
  double operator()(double x) const;
  double evaluate(std::size_t interval, double offset) const;

  std::size_t size() const { return y_.size(); }

 private:
  double h_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

// Resample onto a finer uniform grid spanning the original range. Knots
// that land on the new grid are reproduced exactly.
Spectrum upsample(const Spectrum& spec, double target_step = kUpsampledStepPm);

struct CorrelationPeak {
  double shift = 0.0;        // pm, positive = shifted spectrum moved to longer wavelengths
  double correlation = 0.0;  // Pearson coefficient at the peak
};

// Inclusive lag range (in grid steps) covering (-fsr/2, +fsr/2].
struct LagWindow {
  long min_lag = 0;
  long max_lag = 0;
};
LagWindow lag_window(double fsr, double step);

// Lag in (-fsr/2, +fsr/2] maximising the Pearson correlation between
// shifted[i + lag] and reference[i] over their overlap. Every lag of the
// window is evaluated; ties go to the smallest |lag|.
CorrelationPeak correlation_shift(const Spectrum& shifted, const Spectrum& reference, double fsr);

struct ShiftEstimate {
  double delta_lambda = 0.0;  // pm
  double delta_1 = 0.0;       // pm, against the reference measured before
  double delta_2 = 0.0;       // pm, against the reference measured after
  double correlation_1 = 0.0;
  double correlation_2 = 0.0;
};

// Inputs must share one (upsampled) grid.
ShiftEstimate bracketed_shift(const Spectrum& ref_before, const Spectrum& measurement,
                              const Spectrum& ref_after, double fsr);

// Raw OSA-resolution spectra in, upsampled and bracketed estimate out.
ShiftEstimate extract_shift(const Spectrum& ref_before, const Spectrum& measurement,
                            const Spectrum& ref_after, double fsr,
                            double target_step = kUpsampledStepPm);

// Batch extraction over a directory holding phases.csv (sample_id, puc_<id>...)
// and, per sample, <id>_before.csv, <id>_meas.csv and <id>_after.csv.
struct ExtractedSample {
  std::string sample_id;
  std::vector<double> phases;
  ShiftEstimate estimate;
};

struct ExtractedBatch {
  std::vector<int> puc_ids;
  std::vector<ExtractedSample> samples;
};

void write_spectrum_triple(const std::filesystem::path& dir, const std::string& sample_id,
                           const Spectrum& before, const Spectrum& meas, const Spectrum& after);
void write_phase_table(const std::filesystem::path& path, std::span<const int> puc_ids,
                       std::span<const std::string> sample_ids,
                       std::span<const std::vector<double>> phases);

ExtractedBatch extract_batch(const std::filesystem::path& dir, double fsr, unsigned jobs = 0);

// sample_id,puc_<id>...,delta_lambda_pm,corr1,corr2
void write_samples_csv(std::ostream& out, const ExtractedBatch& batch);

}  // namespace xtalk

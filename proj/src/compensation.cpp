#include "xtalk/compensation.hpp"

#include <algorithm>
#include <numbers>
#include <random>

#include "xtalk/errors.hpp"
#include "xtalk/evaluation.hpp"
#include "xtalk/parallel.hpp"
#include "xtalk/random.hpp"
#include "xtalk/spectrum_pipeline.hpp"

namespace xtalk {

double compensation_phase(double delta_pred_pm, double fsr_pm) {
  if (!(fsr_pm > 0.0)) throw InputError("fsr must be positive");
  return -2.0 * std::numbers::pi * delta_pred_pm / fsr_pm;
}

std::vector<std::size_t> pick_test_samples(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw InputError("need at least one compensation sample");
  if (count > ds.test.size()) {
    throw InputError("asked for " + std::to_string(count) + " compensation samples but the test split has " +
                     std::to_string(ds.test.size()));
  }
  std::vector<std::size_t> pool = ds.test;
  auto rng = make_rng(seed, 0x636f6d70);
  // Partial Fisher-Yates: the first `count` slots end up a uniform draw.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<CompensationRecord> run_compensation(const RingBench& bench, const NoiseSpec& noise,
                                                 const ShiftPredictor& predictor,
                                                 const Dataset& ds,
                                                 const std::vector<std::size_t>& rows,
                                                 std::uint64_t seed, unsigned jobs) {
  validate(noise);
  if (rows.empty()) throw InputError("no compensation samples given");
  if (static_cast<std::size_t>(ds.phases.cols()) != bench.interfering().size()) {
    throw InputError("dataset " + ds.ring_id + " does not match ring " + bench.ring().name);
  }
  NoiseSpec fresh = noise;
  fresh.seed = derive_seed(noise.seed, seed);
  const DriftTrack drift(noise.drift_step_std_pm, derive_seed(seed, 0x6466), 4 * rows.size() + 1);
  const std::size_t p = bench.interfering().size();
  const std::vector<double> zeros(p, 0.0);

  std::vector<CompensationRecord> out(rows.size());
  parallel_for(rows.size(), jobs, [&](std::size_t k) {
    if (rows[k] >= ds.size()) throw InputError("compensation sample index out of range");
    const auto row = static_cast<Eigen::Index>(rows[k]);
    std::vector<double> phases(p);
    for (std::size_t i = 0; i < p; ++i) phases[i] = ds.phases(row, static_cast<Eigen::Index>(i));

    CompensationRecord& r = out[k];
    r.sample_id = rows[k];
    r.delta_pred = predictor(phases);
    r.phi_comp = compensation_phase(r.delta_pred, bench.fsr());
    r.per_puc_phi = r.phi_comp / static_cast<double>(kLoopPucs);

    const std::size_t s = 4 * k;
    const Spectrum ref0 = bench.measure(zeros, fresh, drift, s);
    const Spectrum meas = bench.measure(phases, fresh, drift, s + 1);
    const Spectrum ref1 = bench.measure(zeros, fresh, drift, s + 2);
    const Spectrum post =
        bench.measure(phases, fresh, drift, s + 3, static_cast<double>(kLoopPucs) * r.per_puc_phi);
    const Spectrum ref2 = bench.measure(zeros, fresh, drift, s + 4);
    r.delta_meas = extract_shift(ref0, meas, ref1, bench.fsr()).delta_lambda;
    r.delta_post_comp = extract_shift(ref1, post, ref2, bench.fsr()).delta_lambda;
  });
  return out;
}

Quantiles quantiles(std::span<const double> v) {
  return {percentile(v, 0.10), percentile(v, 0.25), percentile(v, 0.50), percentile(v, 0.75),
          percentile(v, 0.90)};
}

BoxplotSummary boxplot_summary(const std::vector<CompensationRecord>& records) {
  if (records.empty()) throw InputError("boxplot summary of no records");
  std::vector<double> meas, pred, post;
  for (const auto& r : records) {
    meas.push_back(r.delta_meas);
    pred.push_back(r.delta_pred);
    post.push_back(r.delta_post_comp);
  }
  return {quantiles(meas), quantiles(pred), quantiles(post)};
}

}  // namespace xtalk

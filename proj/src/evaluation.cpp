#include "xtalk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "xtalk/errors.hpp"
#include "xtalk/parallel.hpp"
#include "xtalk/random.hpp"

namespace xtalk {

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double vec_rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return rmse({a.data(), static_cast<std::size_t>(a.size())}, {b.data(), static_cast<std::size_t>(b.size())});
}

}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.empty()) throw InputError("rmse of an empty list");
  if (predictions.size() != truths.size()) throw InputError("rmse needs equal-length lists");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - truths[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("percentile rank must lie in [0, 1]");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + (s[hi] - s[lo]) * frac;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InputError("mean of an empty list");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman needs equal-length lists");
  if (x.size() < 2) throw InputError("spearman needs at least two points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

SizeSweepResult size_sweep(const Dataset& ds, ModelKind kind, const std::vector<std::size_t>& sizes,
                           std::size_t n_subsets, std::uint64_t seed, const ModelSettings& settings,
                           unsigned jobs) {
  if (sizes.empty()) throw InputError("size sweep needs at least one size");
  if (n_subsets == 0) throw InputError("size sweep needs at least one subset");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0) throw InputError("sweep sizes must be positive");
    if (k > 0 && sizes[k] <= sizes[k - 1]) throw InputError("sweep sizes must be strictly increasing");
  }
  if (sizes.back() > ds.train.size()) {
    throw InputError("sweep size " + std::to_string(sizes.back()) + " exceeds the train split (" +
                     std::to_string(ds.train.size()) + " samples)");
  }
  const SampleSet test = test_set(ds);
  const std::size_t jobs_total = sizes.size() * n_subsets;
  std::vector<double> train_rmse(jobs_total), test_rmse(jobs_total);

  parallel_for(jobs_total, jobs, [&](std::size_t t) {
    const std::size_t k = t / n_subsets;
    const std::size_t b = t % n_subsets;
    auto rng = make_rng(derive_seed(seed, sizes[k]), b);
    std::uniform_int_distribution<std::size_t> pick(0, ds.train.size() - 1);
    std::vector<std::size_t> rows(sizes[k]);
    for (auto& r : rows) r = ds.train[pick(rng)];
    const SampleSet sub = select(ds, rows);
    FittedModel m;
    switch (kind) {
      case ModelKind::Tpm: m = fit_tpm(sub); break;
      case ModelKind::Thdm: m = fit_thdm(sub, ds.distances, settings.thdm); break;
      case ModelKind::Lr: m = fit_lr(sub, settings.lr); break;
    }
    train_rmse[t] = m.train_rmse;
    test_rmse[t] = vec_rmse(predict(m, test.phases, ds.distances), test.delta_lambda);
  });

  SizeSweepResult out;
  out.kind = kind;
  out.ring_id = ds.ring_id;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const std::span<const double> tr(train_rmse.data() + k * n_subsets, n_subsets);
    const std::span<const double> te(test_rmse.data() + k * n_subsets, n_subsets);
    out.points.push_back({sizes[k], mean(tr), population_std(tr), mean(te), population_std(te)});
  }
  return out;
}

CrossEvalMatrix cross_eval(const std::vector<FittedModel>& models,
                           const std::vector<const Dataset*>& datasets, unsigned jobs) {
  if (models.size() != datasets.size()) throw InputError("cross-eval needs one model per dataset");
  const std::size_t r = models.size();
  CrossEvalMatrix out;
  out.rmse.assign(r, std::vector<double>(r, 0.0));
  for (std::size_t i = 0; i < r; ++i) {
    if (datasets[i] == nullptr) throw InputError("cross-eval dataset missing");
    if (datasets[i]->distances.size() != static_cast<std::size_t>(datasets[i]->phases.cols())) {
      throw InputError("ring " + datasets[i]->ring_id + " has no distance for every PUC");
    }
    if (models[i].kind != ModelKind::Thdm) {
      throw InputError("cross-eval uses distance-aware ThDM models; got " + to_string(models[i].kind));
    }
    out.rings.push_back(datasets[i]->ring_id);
  }
  parallel_for(r * r, jobs, [&](std::size_t t) {
    const std::size_t m = t / r;
    const std::size_t n = t % r;
    const Dataset& ds = *datasets[m];
    const SampleSet test = test_set(ds);
    out.rmse[m][n] = vec_rmse(predict_thdm(models[n].thdm, test.phases, ds.distances), test.delta_lambda);
  });
  return out;
}

WeightDiagnostics weight_distance_diagnostics(const LrParams& lr, std::span<const int> puc_ids,
                                              std::span<const double> distances) {
  if (lr.weights.size() != distances.size() || puc_ids.size() != distances.size()) {
    throw InputError("weights, PUC ids and distances must be aligned");
  }
  WeightDiagnostics out;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    out.rows.push_back({puc_ids[i], distances[i], lr.weights[i]});
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const WeightRow& a, const WeightRow& b) { return a.distance < b.distance; });
  out.spearman = distances.size() < 2 ? 0.0 : spearman(distances, lr.weights);
  return out;
}

}  // namespace xtalk

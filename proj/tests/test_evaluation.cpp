#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "support.hpp"
#include "xtalk/errors.hpp"
#include "xtalk/evaluation.hpp"

using namespace xtalk;

TEST_CASE("rmse") {
  CHECK(rmse(std::vector<double>{1, 2}, std::vector<double>{0, 0}) == doctest::Approx(std::sqrt(2.5)));
  CHECK(rmse(std::vector<double>{3}, std::vector<double>{3}) == 0.0);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), InputError);
  CHECK_THROWS_AS(rmse(std::vector<double>{1}, std::vector<double>{1, 2}), InputError);
}

TEST_CASE("percentiles interpolate between closest ranks") {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 1.0);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(1));
  CHECK(percentile(v, 0.5) == doctest::Approx(5.5));
  CHECK(percentile(v, 0.25) == doctest::Approx(3.25));
  CHECK(percentile(v, 0.75) == doctest::Approx(7.75));
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 10.0);
  CHECK(percentile(std::vector<double>{4.0}, 0.9) == 4.0);
  CHECK_THROWS_AS(percentile(v, 1.5), InputError);
}

TEST_CASE("mean and population std") {
  const std::vector<double> v = {2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == doctest::Approx(5.0));
  CHECK(population_std(v) == doctest::Approx(2.0));
}

TEST_CASE("spearman") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  CHECK(spearman(x, std::vector<double>{10, 8, 5, 1, 0}) == doctest::Approx(-1.0));
  CHECK(spearman(x, std::vector<double>{1, 4, 9, 16, 25}) == doctest::Approx(1.0));
  // Ties take the average rank: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
  CHECK(spearman(std::vector<double>{1, 2, 2, 3}, std::vector<double>{1, 2, 3, 4}) ==
        doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
}

TEST_CASE("weight diagnostics on decaying and shuffled weights") {
  const auto bench = test_support::default_bench();
  const std::vector<double> d(bench.distances().begin(), bench.distances().end());
  std::vector<int> ids;
  for (auto p : bench.interfering()) ids.push_back(p.index);
  LrParams lr;
  for (double x : d) lr.weights.push_back(std::exp(-x));
  const auto diag = weight_distance_diagnostics(lr, ids, d);
  CHECK(diag.rows.size() == d.size());
  CHECK(std::is_sorted(diag.rows.begin(), diag.rows.end(),
                       [](const WeightRow& a, const WeightRow& b) { return a.distance < b.distance; }));
  // Distinct distances give -1 exactly; equal distances give ties on both sides.
  CHECK(diag.spearman < -0.99);

  std::mt19937_64 rng(4);
  double acc = 0;
  for (int k = 0; k < 50; ++k) {
    auto w = lr.weights;
    std::shuffle(w.begin(), w.end(), rng);
    acc += std::abs(weight_distance_diagnostics({w, 0.0}, ids, d).spearman);
  }
  CHECK(acc / 50 < 0.3);
}

namespace {

const Dataset& small_dataset(const std::string& ring) {
  static std::map<std::string, Dataset> cache;
  auto it = cache.find(ring);
  if (it == cache.end()) {
    DatasetOptions opts;
    opts.n_samples = 250;
    it = cache.emplace(ring, build_dataset(test_support::default_bench(ring), NoiseSpec{}, opts, 1)).first;
  }
  return it->second;
}

}  // namespace

TEST_CASE("size sweep is deterministic and sized as requested") {
  const auto& ds = small_dataset("mrr1");
  const auto a = size_sweep(ds, ModelKind::Tpm, {20, 50, 200}, 4, 9, {}, 1);
  const auto b = size_sweep(ds, ModelKind::Tpm, {20, 50, 200}, 4, 9, {}, 0);
  REQUIRE(a.points.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.points[k].size == std::vector<std::size_t>{20, 50, 200}[k]);
    CHECK(a.points[k].test_mean == b.points[k].test_mean);
    CHECK(a.points[k].test_std == b.points[k].test_std);
    CHECK(a.points[k].test_std >= 0.0);
  }
  CHECK_THROWS_AS(size_sweep(ds, ModelKind::Tpm, {500}, 2, 9), InputError);
}

TEST_CASE("cross evaluation diagonal is each model's own test RMSE") {
  const auto& a = small_dataset("mrr1");
  const auto& b = small_dataset("mrr3");
  const std::vector<FittedModel> models = {fit_model(ModelKind::Thdm, a), fit_model(ModelKind::Thdm, b)};
  const auto m = cross_eval(models, {&a, &b}, 1);
  REQUIRE(m.rings == std::vector<std::string>{"mrr1", "mrr3"});
  CHECK(m.rmse[0][0] == doctest::Approx(*models[0].test_rmse).epsilon(1e-12));
  CHECK(m.rmse[1][1] == doctest::Approx(*models[1].test_rmse).epsilon(1e-12));
  CHECK(m.rmse[0][1] > 0.0);
  CHECK(m.rmse[1][0] > 0.0);
  CHECK_THROWS_AS(cross_eval({fit_model(ModelKind::Tpm, a)}, {&a}), InputError);
}

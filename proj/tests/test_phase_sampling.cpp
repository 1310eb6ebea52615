#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "support.hpp"
#include "xtalk/errors.hpp"
#include "xtalk/phase_sampling.hpp"

using namespace xtalk;
using test_support::kPi;

TEST_CASE("beta parameters from mean and variance") {
  const auto p = beta_params(0.5, 0.05);
  CHECK(p.v == doctest::Approx(4.0));
  CHECK(p.alpha == doctest::Approx(2.0));
  CHECK(p.beta == doctest::Approx(2.0));
  const auto q = beta_params(0.3, 0.01);
  CHECK(q.v == doctest::Approx(0.21 / 0.01 - 1));
  CHECK(q.alpha + q.beta == doctest::Approx(q.v));
  CHECK_THROWS_AS(beta_params(0.5, 0.25), InputError);
  CHECK_THROWS_AS(beta_params(0.0, 0.01), InputError);
  CHECK_THROWS_AS(beta_params(0.5, -0.01), InputError);
}

TEST_CASE("phase vectors: range, determinism and portion layout") {
  const auto a = sample_phase_vectors(103, 66, 0.05, 20, 42);
  const auto b = sample_phase_vectors(103, 66, 0.05, 20, 42);
  const auto c = sample_phase_vectors(103, 66, 0.05, 20, 43);
  CHECK(a.phases == b.phases);
  CHECK(a.phases != c.phases);
  CHECK(a.phases.minCoeff() >= 0.0);
  CHECK(a.phases.maxCoeff() <= 2 * kPi);
  // 103 = 5 * 20 + 3: the three leftovers land in portions 0, 1, 2.
  std::vector<int> count(20, 0);
  for (auto k : a.portion) ++count[k];
  for (int k = 0; k < 20; ++k) CHECK(count[static_cast<std::size_t>(k)] == (k < 3 ? 6 : 5));
  // Extreme portions cannot carry variance 0.05 and are clamped.
  CHECK(a.warnings.size() == 2);
}

TEST_CASE("total phase covers its range evenly") {
  const std::size_t n = 5000, p = 66;
  const auto s = sample_phase_vectors(n, p, 0.05, 20, 7);
  std::vector<int> bins(20, 0);
  const double range = static_cast<double>(p) * 2 * kPi;
  for (Eigen::Index j = 0; j < s.phases.rows(); ++j) {
    const double total = s.phases.row(j).sum();
    bins[std::min<std::size_t>(19, static_cast<std::size_t>(total / range * 20))]++;
  }
  const auto [mn, mx] = std::minmax_element(bins.begin(), bins.end());
  REQUIRE(*mn > 0);
  CHECK(static_cast<double>(*mx) / *mn <= 2.0);
}

TEST_CASE("beta sampler moments") {
  // One portion with mean 0.5 is a plain Beta(mean, variance) sampler.
  const double mu = 0.5, var = 0.05;
  const std::size_t n = 100000;
  const auto s = sample_phase_vectors(n, 1, var, 1, 5);
  const Eigen::ArrayXd x = s.phases.col(0).array() / (2 * kPi);
  const double m = x.mean();
  const double v = (x - m).square().mean();
  const double se_mean = std::sqrt(var / static_cast<double>(n));
  // Var of the sample variance for Beta(2, 2): (mu4 - var^2) / n with mu4 = 3/560.
  const double mu4 = 3.0 / 560.0;
  const double se_var = std::sqrt((mu4 - var * var) / static_cast<double>(n));
  CHECK(std::abs(m - mu) < 3 * se_mean);
  CHECK(std::abs(v - var) < 3 * se_var);
}

TEST_CASE("phase columns are mutually independent within a portion") {
  // Across portions every column follows the shared mean, so independence is
  // checked on the residual after removing each portion's mean.
  const auto s = sample_phase_vectors(5000, 66, 0.05, 20, 9);
  const Eigen::Index a = 3, b = 40;
  std::vector<double> x, y;
  for (Eigen::Index j = 0; j < s.phases.rows(); ++j) {
    const double mean = (static_cast<double>(s.portion[static_cast<std::size_t>(j)]) + 0.5) / 20 * 2 * kPi;
    x.push_back(s.phases(j, a) - mean);
    y.push_back(s.phases(j, b) - mean);
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
}

TEST_CASE("noiseless dataset reproduces the ground truth") {
  const auto bench = test_support::default_bench("mrr3");
  DatasetOptions opts;
  opts.n_samples = 60;
  const auto ds = build_dataset(bench, NoiseSpec::noiseless(), opts, 1);
  REQUIRE(ds.size() == 60);
  CHECK(ds.puc_ids.size() == 58);
  CHECK(ds.distances.size() == 58);
  for (Eigen::Index j = 0; j < 60; ++j) {
    std::vector<double> ph(58);
    for (Eigen::Index i = 0; i < 58; ++i) ph[static_cast<std::size_t>(i)] = ds.phases(j, i);
    const double truth = test_support::wrap(bench.true_shift(ph), bench.fsr());
    CHECK(std::abs(ds.delta_lambda(j) - truth) <= 0.05);
  }
}

TEST_CASE("split sizes and disjointness") {
  Dataset ds;
  ds.delta_lambda = Eigen::VectorXd::Zero(5000);
  ds.phases = Eigen::MatrixXd::Zero(5000, 1);
  split_dataset(ds, 0.8, 4);
  CHECK(ds.train.size() == 4000);
  CHECK(ds.test.size() == 1000);
  std::vector<std::size_t> all = ds.train;
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

TEST_CASE("datasets are reproducible and survive a disk round trip") {
  namespace fs = std::filesystem;
  const auto bench = test_support::default_bench("mrr2");
  DatasetOptions opts;
  opts.n_samples = 40;
  const NoiseSpec noise;
  const auto a = build_dataset(bench, noise, opts, 1);
  const auto b = build_dataset(bench, noise, opts, 0);
  CHECK(a.delta_lambda == b.delta_lambda);
  CHECK(a.phases == b.phases);
  CHECK(a.train == b.train);

  const fs::path path = fs::temp_directory_path() / "xtalk_ds_test" / "mrr2.csv";
  write_dataset(path, a);
  const auto back = read_dataset(path);
  CHECK(back.phases == a.phases);
  CHECK(back.delta_lambda == a.delta_lambda);
  CHECK(back.train == a.train);
  CHECK(back.test == a.test);
  CHECK(back.distances == a.distances);
  CHECK(back.noise.seed == noise.seed);
  fs::remove_all(path.parent_path());
}

TEST_CASE("dataset options are validated") {
  DatasetOptions o;
  o.variance = 0.3;
  CHECK_THROWS_AS(validate(o), ConfigError);
  o = {};
  o.train_fraction = 1.0;
  CHECK_THROWS_AS(validate(o), ConfigError);
}

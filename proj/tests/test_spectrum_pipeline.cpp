#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "support.hpp"
#include "xtalk/errors.hpp"
#include "xtalk/spectrum_pipeline.hpp"

using namespace xtalk;

namespace {

// Exhaustive Pearson search written directly from the definition.
CorrelationPeak brute_force(const Spectrum& s, const Spectrum& r, double fsr) {
  const auto w = lag_window(fsr, s.step);
  const long n = static_cast<long>(s.size());
  CorrelationPeak best{0.0, -std::numeric_limits<double>::infinity()};
  long best_lag = 0;
  for (long l = w.min_lag; l <= w.max_lag; ++l) {
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    long m = 0;
    for (long i = 0; i < n; ++i) {
      if (i + l < 0 || i + l >= n) continue;
      const double x = s.power[static_cast<std::size_t>(i + l)];
      const double y = r.power[static_cast<std::size_t>(i)];
      sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
      ++m;
    }
    if (m < 2) continue;
    const double c = (m * sxy - sx * sy) / std::sqrt((m * sxx - sx * sx) * (m * syy - sy * sy));
    if (c > best.correlation + 1e-12 ||
        (std::abs(c - best.correlation) <= 1e-12 && std::abs(l) < std::abs(best_lag))) {
      best.correlation = c;
      best_lag = l;
    }
  }
  best.shift = static_cast<double>(best_lag) * s.step;
  return best;
}

Spectrum sampled(double step, std::size_t n, double (*f)(double)) {
  Spectrum s;
  s.step = step;
  s.power.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.power[i] = f(static_cast<double>(i) * step);
  return s;
}

}  // namespace

TEST_CASE("not-a-knot spline reproduces cubic polynomials") {
  auto cubic = [](double x) { return 0.3 - 1.2 * x + 0.05 * x * x - 0.002 * x * x * x; };
  std::vector<double> y;
  for (int i = 0; i < 12; ++i) y.push_back(cubic(1.6 * i));
  const UniformCubicSpline sp(1.6, y);
  for (double x = 0.0; x <= 1.6 * 11; x += 0.37) CHECK(sp(x) == doctest::Approx(cubic(x)).epsilon(1e-10));
  CHECK_THROWS_AS(UniformCubicSpline(1.6, std::vector<double>{1, 2, 3}), InputError);
}

TEST_CASE("upsampling keeps the knots and the span") {
  const auto bench = test_support::default_bench();
  const Spectrum raw = bench.render(3.3);
  const Spectrum up = upsample(raw);
  CHECK(up.size() == 49921);
  CHECK(up.span() == doctest::Approx(raw.span()));
  for (std::size_t i = 0; i < raw.size(); ++i) CHECK(up.power[i * 160] == raw.power[i]);
  CHECK_THROWS_AS(upsample(raw, 2.0), InputError);
}

TEST_CASE("lag window covers (-fsr/2, fsr/2]") {
  const auto w = lag_window(118.4, 0.01);
  CHECK(w.min_lag == -5919);
  CHECK(w.max_lag == 5920);
  CHECK_THROWS_AS(lag_window(0.0, 0.01), InputError);
}

TEST_CASE("FFT correlation agrees with the brute-force search") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.1);
  const auto bench = test_support::default_bench("mrr3");
  for (double shift : {0.0, 7.3, -22.1, 40.0, 58.0}) {
    Spectrum ref = bench.render(0.0);
    Spectrum meas = bench.render(shift);
    for (auto& p : ref.power) p += noise(rng);
    for (auto& p : meas.power) p += noise(rng);
    // Coarse grid keeps the oracle cheap; the window logic is grid independent.
    const auto fast = correlation_shift(meas, ref, bench.fsr());
    const auto slow = brute_force(meas, ref, bench.fsr());
    CHECK(fast.shift == doctest::Approx(slow.shift));
    CHECK(fast.correlation == doctest::Approx(slow.correlation).epsilon(1e-9));
  }
}

TEST_CASE("noiseless shifts are recovered through the full pipeline") {
  const auto bench = test_support::default_bench();
  const Spectrum ref = bench.render(0.0);
  for (double shift : {0.0, 0.37, -5.55, 12.345, 33.3, -58.9, 59.1}) {
    const auto est = extract_shift(ref, bench.render(shift), ref, bench.fsr());
    CHECK(std::abs(est.delta_lambda - shift) <= 0.05);
    CHECK(est.delta_1 == est.delta_2);
    CHECK(est.correlation_1 > 0.99);
  }
}

TEST_CASE("bracketing cancels linear drift") {
  const auto bench = test_support::default_bench();
  const auto est = extract_shift(bench.render(0.0), bench.render(10.0 + 0.5), bench.render(1.0), bench.fsr());
  CHECK(std::abs(est.delta_lambda - 10.0) <= 0.05);
}

TEST_CASE("degenerate and mismatched inputs") {
  Spectrum flat;
  flat.step = 0.01;
  flat.power.assign(1000, -3.0);
  Spectrum ramp = flat;
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp.power[i] = static_cast<double>(i % 50);
  CHECK_THROWS_AS(correlation_shift(flat, ramp, 5.0), DegenerateError);
  Spectrum other = ramp;
  other.step = 0.02;
  CHECK_THROWS_AS(correlation_shift(ramp, other, 5.0), InputError);
  CHECK_THROWS_AS(correlation_shift(ramp, ramp, -1.0), InputError);
}

TEST_CASE("spectrum CSV round trip") {
  const auto bench = test_support::default_bench();
  const Spectrum s = bench.render(4.0);
  std::stringstream io;
  write_spectrum_csv(io, s);
  const Spectrum back = read_spectrum_csv(io);
  CHECK(back.power == s.power);
  CHECK(back.step == doctest::Approx(s.step));
  std::stringstream bad("wavelength_nm,power_dB\n1549.75,1\n1549.7516,x\n");
  CHECK_THROWS_AS(read_spectrum_csv(bad), InputError);
}

TEST_CASE("batch extraction over a spectra directory") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "xtalk_batch_test";
  fs::remove_all(dir);
  const auto bench = test_support::default_bench();
  const std::vector<int> ids = {0, 1};
  const std::vector<std::string> names = {"a", "b"};
  const std::vector<std::vector<double>> phases = {{1.0, 2.0}, {0.5, 0.25}};
  write_spectrum_triple(dir, "a", bench.render(0), bench.render(5.0), bench.render(0));
  write_spectrum_triple(dir, "b", bench.render(0), bench.render(-8.0), bench.render(0));
  write_phase_table(dir / "phases.csv", ids, names, phases);
  const auto batch = extract_batch(dir, bench.fsr(), 1);
  REQUIRE(batch.samples.size() == 2);
  CHECK(std::abs(batch.samples[0].estimate.delta_lambda - 5.0) <= 0.05);
  CHECK(std::abs(batch.samples[1].estimate.delta_lambda + 8.0) <= 0.05);
  CHECK(batch.samples[1].phases == phases[1]);
  std::ostringstream out;
  write_samples_csv(out, batch);
  CHECK(out.str().rfind("sample_id,puc_0,puc_1,delta_lambda_pm,corr1,corr2\n", 0) == 0);
  fs::remove_all(dir);
  CHECK_THROWS_AS(extract_batch(dir, 118.4), InputError);
}

TEST_CASE("simple sinusoid shift") {
  auto f = [](double x) { return std::sin(2 * 3.141592653589793 * x / 20.0); };
  const Spectrum a = sampled(0.1, 400, f);
  Spectrum b = a;
  for (std::size_t i = 0; i < b.size(); ++i) b.power[i] = f(static_cast<double>(i) * 0.1 - 1.3);
  CHECK(correlation_shift(b, a, 20.0).shift == doctest::Approx(1.3));
}

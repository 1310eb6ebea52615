#include "xtalk/spectrum_pipeline.hpp"

#include <fftw3.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>

#include "xtalk/csv.hpp"
#include "xtalk/errors.hpp"
#include "xtalk/parallel.hpp"

namespace xtalk {

// ---------------------------------------------------------------- csv utils

namespace csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw InputError(where + ": \"" + std::string(text) + "\" is not a number");
  }
  return v;
}

long parse_long(std::string_view text, const std::string& where) {
  long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw InputError(where + ": \"" + std::string(text) + "\" is not an integer");
  }
  return v;
}

std::string join(const std::vector<std::string>& fields, char sep) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

}  // namespace csv

// ------------------------------------------------------------------ spline

UniformCubicSpline::UniformCubicSpline(double step, std::span<const double> values)
    : h_(step), y_(values.begin(), values.end()), m_(values.size(), 0.0) {
  const std::size_t n = y_.size();
  if (n < 4) throw InputError("cubic spline needs at least 4 points");
  if (!(step > 0.0)) throw InputError("spline step must be positive");

  const double k = 6.0 / (h_ * h_);
  auto rhs = [&](std::size_t i) { return k * (y_[i - 1] - 2.0 * y_[i] + y_[i + 1]); };

  // Not-a-knot at x1 and x_{n-2} pins M1 and M_{n-2} directly.
  m_[1] = rhs(1) / 6.0;
  m_[n - 2] = rhs(n - 2) / 6.0;

  // Tridiagonal (1, 4, 1) system for M2 .. M_{n-3}.
  if (n >= 5) {
    const std::size_t first = 2;
    const std::size_t last = n - 3;
    const std::size_t count = last - first + 1;
    std::vector<double> c(count, 0.0);
    std::vector<double> d(count, 0.0);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t i = first + j;
      double r = rhs(i);
      if (i == first) r -= m_[1];
      if (i == last) r -= m_[n - 2];
      const double denom = j == 0 ? 4.0 : 4.0 - c[j - 1];
      c[j] = 1.0 / denom;
      d[j] = (j == 0 ? r : r - d[j - 1]) / denom;
    }
    m_[last] = d[count - 1];
    for (std::size_t j = count - 1; j-- > 0;) {
      m_[first + j] = d[j] - c[j] * m_[first + j + 1];
    }
  }
  m_[0] = 2.0 * m_[1] - m_[2];
  m_[n - 1] = 2.0 * m_[n - 2] - m_[n - 3];
}

double UniformCubicSpline::evaluate(std::size_t i, double u) const {
  if (u == 0.0) return y_[i];
  const double h = h_;
  const double v = h - u;
  return (m_[i] * v * v * v + m_[i + 1] * u * u * u) / (6.0 * h) +
         (y_[i] - m_[i] * h * h / 6.0) * (v / h) + (y_[i + 1] - m_[i + 1] * h * h / 6.0) * (u / h);
}

double UniformCubicSpline::operator()(double x) const {
  const std::size_t last = y_.size() - 2;
  const double pos = x / h_;
  std::size_t i = pos <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(pos));
  i = std::min(i, last);
  return evaluate(i, x - static_cast<double>(i) * h_);
}

Spectrum upsample(const Spectrum& spec, double target_step) {
  if (spec.size() < 4) throw InputError("upsampling needs a spectrum with at least 4 points");
  if (!(target_step > 0.0) || !(target_step < spec.step)) {
    throw InputError("target step must be positive and finer than the spectrum step");
  }
  const UniformCubicSpline spline(spec.step, spec.power);
  Spectrum out;
  out.start_wavelength = spec.start_wavelength;
  out.step = target_step;
  const auto count = static_cast<std::size_t>(std::floor(spec.span() / target_step + 1e-9)) + 1;
  out.power.resize(count);

  const double ratio = spec.step / target_step;
  const double whole = std::round(ratio);
  if (std::abs(ratio - whole) < 1e-9) {
    const auto r = static_cast<std::size_t>(whole);
    const std::size_t last = spec.size() - 2;
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t i = k / r;
      std::size_t j = k % r;
      if (i > last) {  // the final knot
        i = last;
        j = r;
      }
      out.power[k] = j == r ? spec.power[i + 1]
                            : spline.evaluate(i, static_cast<double>(j) * target_step);
    }
  } else {
    for (std::size_t k = 0; k < count; ++k) {
      out.power[k] = spline(static_cast<double>(k) * target_step);
    }
  }
  return out;
}

// ------------------------------------------------------------- correlation

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Linear cross-correlation through FFTW, sized for one signal length and
// lag bound. Plans are made under a lock; execution is thread-safe.
class FftCrossCorrelator {
 public:
  FftCrossCorrelator(std::size_t n, std::size_t max_abs_lag) : n_(n) {
    std::size_t m = 1;
    while (m < n + max_abs_lag + 1) m <<= 1;
    m_ = m;
    bins_ = m / 2 + 1;
    real_a_ = fftw_alloc_real(m_);
    real_b_ = fftw_alloc_real(m_);
    spec_a_ = fftw_alloc_complex(bins_);
    spec_b_ = fftw_alloc_complex(bins_);
    std::lock_guard lock(fftw_planner_mutex());
    forward_a_ = fftw_plan_dft_r2c_1d(static_cast<int>(m_), real_a_, spec_a_, FFTW_ESTIMATE);
    forward_b_ = fftw_plan_dft_r2c_1d(static_cast<int>(m_), real_b_, spec_b_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(m_), spec_a_, real_a_, FFTW_ESTIMATE);
  }
  FftCrossCorrelator(const FftCrossCorrelator&) = delete;
  FftCrossCorrelator& operator=(const FftCrossCorrelator&) = delete;
  ~FftCrossCorrelator() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(forward_a_);
      fftw_destroy_plan(forward_b_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(real_a_);
    fftw_free(real_b_);
    fftw_free(spec_a_);
    fftw_free(spec_b_);
  }

  std::size_t length() const { return n_; }
  std::size_t capacity() const { return m_; }

  // out[l - min_lag] = sum_i s[i + l] * r[i]
  void correlate(std::span<const double> s, std::span<const double> r, long min_lag,
                 long max_lag, std::vector<double>& out) {
    std::fill(real_a_, real_a_ + m_, 0.0);
    std::fill(real_b_, real_b_ + m_, 0.0);
    std::copy(s.begin(), s.end(), real_a_);
    std::copy(r.begin(), r.end(), real_b_);
    fftw_execute(forward_a_);
    fftw_execute(forward_b_);
    for (std::size_t k = 0; k < bins_; ++k) {
      const double ar = spec_a_[k][0];
      const double ai = spec_a_[k][1];
      const double br = spec_b_[k][0];
      const double bi = spec_b_[k][1];
      spec_a_[k][0] = ar * br + ai * bi;
      spec_a_[k][1] = ai * br - ar * bi;
    }
    fftw_execute(inverse_);
    const double scale = 1.0 / static_cast<double>(m_);
    out.resize(static_cast<std::size_t>(max_lag - min_lag + 1));
    for (long l = min_lag; l <= max_lag; ++l) {
      const auto idx = l >= 0 ? static_cast<std::size_t>(l) : m_ - static_cast<std::size_t>(-l);
      out[static_cast<std::size_t>(l - min_lag)] = real_a_[idx] * scale;
    }
  }

 private:
  std::size_t n_;
  std::size_t m_ = 0;
  std::size_t bins_ = 0;
  double* real_a_ = nullptr;
  double* real_b_ = nullptr;
  fftw_complex* spec_a_ = nullptr;
  fftw_complex* spec_b_ = nullptr;
  fftw_plan forward_a_ = nullptr;
  fftw_plan forward_b_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

FftCrossCorrelator& correlator_for(std::size_t n, std::size_t max_abs_lag) {
  thread_local std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<FftCrossCorrelator>>
      cache;
  auto& slot = cache[{n, max_abs_lag}];
  if (!slot) slot = std::make_unique<FftCrossCorrelator>(n, max_abs_lag);
  return *slot;
}

std::vector<double> centered(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - mean;
  return out;
}

std::vector<double> prefix(const std::vector<double>& v, bool squared) {
  std::vector<double> out(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[i + 1] = out[i] + (squared ? v[i] * v[i] : v[i]);
  return out;
}

}  // namespace

LagWindow lag_window(double fsr, double step) {
  if (!(fsr > 0.0)) throw InputError("fsr must be positive");
  if (!(step > 0.0)) throw InputError("grid step must be positive");
  const double half = 0.5 * fsr / step;
  LagWindow w;
  w.max_lag = static_cast<long>(std::floor(half + 1e-9));
  w.min_lag = -static_cast<long>(std::ceil(half - 1e-9)) + 1;
  return w;
}

CorrelationPeak correlation_shift(const Spectrum& shifted, const Spectrum& reference, double fsr) {
  if (!same_grid(shifted, reference)) {
    throw InputError("correlation needs both spectra on the same wavelength grid");
  }
  const std::size_t n = shifted.size();
  if (n < 2) throw InputError("correlation needs at least two samples");
  const LagWindow window = lag_window(fsr, shifted.step);

  const auto s = centered(shifted.power);
  const auto r = centered(reference.power);
  const auto s1 = prefix(s, false);
  const auto s2 = prefix(s, true);
  const auto r1 = prefix(r, false);
  const auto r2 = prefix(r, true);
  constexpr double kFlat = 1e-18;
  auto flat = [&](const std::vector<double>& p1, const std::vector<double>& p2) {
    const double m = static_cast<double>(n);
    return m * p2[n] - p1[n] * p1[n] <= kFlat * m * m;
  };
  if (flat(s1, s2) || flat(r1, r2)) {
    throw DegenerateError("no signal: spectrum is constant, correlation undefined");
  }

  const auto ln = static_cast<long>(n);
  const long lo = std::max(window.min_lag, -(ln - 2));
  const long hi = std::min(window.max_lag, ln - 2);
  if (lo > hi) throw InputError("spectra do not overlap for any lag in the window");

  const auto max_abs = static_cast<std::size_t>(std::max(-lo, hi));
  std::vector<double> cross;
  correlator_for(n, max_abs).correlate(s, r, lo, hi, cross);

  auto pearson = [&](long l, double& out) {
    const auto i0 = static_cast<std::size_t>(std::max(0L, -l));
    const auto i1 = static_cast<std::size_t>(std::min(ln, ln - l));
    const double m = static_cast<double>(i1 - i0);
    const auto j0 = static_cast<std::size_t>(static_cast<long>(i0) + l);
    const auto j1 = static_cast<std::size_t>(static_cast<long>(i1) + l);
    const double ss = s1[j1] - s1[j0];
    const double sss = s2[j1] - s2[j0];
    const double rs = r1[i1] - r1[i0];
    const double rrs = r2[i1] - r2[i0];
    const double vs = m * sss - ss * ss;
    const double vr = m * rrs - rs * rs;
    if (vs <= kFlat * m * m || vr <= kFlat * m * m) return false;
    const double num = m * cross[static_cast<std::size_t>(l - lo)] - ss * rs;
    out = std::clamp(num / std::sqrt(vs * vr), -1.0, 1.0);
    return true;
  };

  bool found = false;
  long best_lag = 0;
  double best = -std::numeric_limits<double>::infinity();
  // Visit lags by increasing |lag| (positive first) so exact ties keep the smallest shift.
  for (long k = 0; k <= std::max(-lo, hi); ++k) {
    for (long l : {k, -k}) {
      if (k == 0 && l < 0) continue;
      if (l < lo || l > hi) continue;
      double c = 0.0;
      if (pearson(l, c) && c > best) {
        best = c;
        best_lag = l;
        found = true;
      }
    }
  }
  if (!found) throw DegenerateError("no signal: overlap regions are constant at every lag");
  return {static_cast<double>(best_lag) * shifted.step, best};
}

ShiftEstimate bracketed_shift(const Spectrum& ref_before, const Spectrum& measurement,
                              const Spectrum& ref_after, double fsr) {
  if (!same_grid(ref_before, measurement) || !same_grid(ref_after, measurement)) {
    throw InputError("bracketing needs all three spectra on one grid");
  }
  const auto first = correlation_shift(measurement, ref_before, fsr);
  const auto second = correlation_shift(measurement, ref_after, fsr);
  return {0.5 * (first.shift + second.shift), first.shift, second.shift, first.correlation,
          second.correlation};
}

ShiftEstimate extract_shift(const Spectrum& ref_before, const Spectrum& measurement,
                            const Spectrum& ref_after, double fsr, double target_step) {
  return bracketed_shift(upsample(ref_before, target_step), upsample(measurement, target_step),
                         upsample(ref_after, target_step), fsr);
}

// ------------------------------------------------------------------- batch

void write_spectrum_triple(const std::filesystem::path& dir, const std::string& sample_id,
                           const Spectrum& before, const Spectrum& meas, const Spectrum& after) {
  std::filesystem::create_directories(dir);
  write_spectrum_csv(dir / (sample_id + "_before.csv"), before);
  write_spectrum_csv(dir / (sample_id + "_meas.csv"), meas);
  write_spectrum_csv(dir / (sample_id + "_after.csv"), after);
}

void write_phase_table(const std::filesystem::path& path, std::span<const int> puc_ids,
                       std::span<const std::string> sample_ids,
                       std::span<const std::vector<double>> phases) {
  if (sample_ids.size() != phases.size()) throw InputError("one phase vector per sample id");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sample_id";
  for (int id : puc_ids) out << ",puc_" << id;
  out << '\n';
  for (std::size_t k = 0; k < sample_ids.size(); ++k) {
    out << sample_ids[k];
    for (double p : phases[k]) out << ',' << format_number(p);
    out << '\n';
  }
}

ExtractedBatch extract_batch(const std::filesystem::path& dir, double fsr, unsigned jobs) {
  const auto table = dir / "phases.csv";
  std::ifstream in(table, std::ios::binary);
  if (!in) throw InputError("batch directory has no phases.csv: " + dir.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(table.string() + ": empty");
  const auto header = csv::split(line);
  if (header.empty() || header[0] != "sample_id") {
    throw InputError(table.string() + ": first column must be sample_id");
  }
  ExtractedBatch batch;
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c].rfind("puc_", 0) != 0) {
      throw InputError(table.string() + ": column \"" + header[c] + "\" is not puc_<id>");
    }
    batch.puc_ids.push_back(
        static_cast<int>(csv::parse_long(header[c].substr(4), table.string() + ": header")));
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const std::string where = table.string() + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) throw InputError(where + ": wrong number of columns");
    ExtractedSample s;
    s.sample_id = fields[0];
    for (std::size_t c = 1; c < fields.size(); ++c) {
      s.phases.push_back(csv::parse_double(fields[c], where));
    }
    batch.samples.push_back(std::move(s));
  }
  parallel_for(batch.samples.size(), jobs, [&](std::size_t k) {
    auto& s = batch.samples[k];
    s.estimate = extract_shift(read_spectrum_csv(dir / (s.sample_id + "_before.csv")),
                               read_spectrum_csv(dir / (s.sample_id + "_meas.csv")),
                               read_spectrum_csv(dir / (s.sample_id + "_after.csv")), fsr);
  });
  return batch;
}

void write_samples_csv(std::ostream& out, const ExtractedBatch& batch) {
  out << "sample_id";
  for (int id : batch.puc_ids) out << ",puc_" << id;
  out << ",delta_lambda_pm,corr1,corr2\n";
  for (const auto& s : batch.samples) {
    out << s.sample_id;
    for (double p : s.phases) out << ',' << format_number(p);
    out << ',' << format_number(s.estimate.delta_lambda) << ','
        << format_number(s.estimate.correlation_1) << ','
        << format_number(s.estimate.correlation_2) << '\n';
  }
}

}  // namespace xtalk

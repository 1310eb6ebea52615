#include "xtalk/phase_sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "xtalk/csv.hpp"
#include "xtalk/errors.hpp"
#include "xtalk/parallel.hpp"
#include "xtalk/random.hpp"
#include "xtalk/spectrum_pipeline.hpp"

namespace xtalk {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string sample_name(std::size_t j) {
  std::string digits = std::to_string(j);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "s" + digits;
}

double beta_draw(std::mt19937_64& rng, const BetaParams& p) {
  std::gamma_distribution<double> ga(p.alpha, 1.0);
  std::gamma_distribution<double> gb(p.beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  if (x + y <= 0.0) return p.alpha / p.v;  // both underflowed; only possible for tiny shapes
  return x / (x + y);
}

}  // namespace

BetaParams beta_params(double mean, double variance) {
  if (!(mean > 0.0 && mean < 1.0)) throw InputError("beta mean must lie in (0, 1)");
  if (!(variance > 0.0)) throw InputError("beta variance must be positive");
  const double v = mean * (1.0 - mean) / variance - 1.0;
  if (!(v > 0.0)) {
    std::ostringstream msg;
    msg << "beta variance " << variance << " must be below mean(1 - mean) = "
        << mean * (1.0 - mean);
    throw InputError(msg.str());
  }
  return {v, mean * v, (1.0 - mean) * v};
}

PhaseSamples sample_phase_vectors(std::size_t n_samples, std::size_t n_pucs, double variance,
                                  std::size_t n_portions, std::uint64_t seed) {
  if (n_pucs == 0) throw InputError("need at least one PUC");
  if (n_portions == 0) throw InputError("need at least one portion");
  if (!(variance > 0.0)) throw InputError("phase variance must be positive");

  PhaseSamples out;
  std::vector<BetaParams> params(n_portions);
  for (std::size_t k = 0; k < n_portions; ++k) {
    const double mean = (static_cast<double>(k) + 0.5) / static_cast<double>(n_portions);
    double var = variance;
    if (var >= mean * (1.0 - mean)) {
      var = 0.9 * mean * (1.0 - mean);
      std::ostringstream msg;
      msg << "portion " << k << ": variance " << variance << " infeasible at mean " << mean
          << ", clamped to " << var;
      out.warnings.push_back(msg.str());
    }
    params[k] = beta_params(mean, var);
  }

  out.phases.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(n_pucs));
  out.portion.resize(n_samples);
  for (std::size_t j = 0; j < n_samples; ++j) {
    const std::size_t k = j % n_portions;
    out.portion[j] = k;
    auto rng = make_rng(seed, j);
    for (std::size_t i = 0; i < n_pucs; ++i) {
      out.phases(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          kTwoPi * beta_draw(rng, params[k]);
    }
  }
  return out;
}

void validate(const DatasetOptions& opts) {
  if (opts.n_samples < 2) throw ConfigError("sampling.n_samples must be at least 2");
  if (opts.n_portions == 0) throw ConfigError("sampling.n_portions must be at least 1");
  if (!(opts.variance > 0.0 && opts.variance < 0.25)) {
    throw ConfigError("sampling.variance must lie in (0, 0.25), the largest mean(1 - mean)");
  }
  if (!(opts.train_fraction > 0.0 && opts.train_fraction < 1.0)) {
    throw ConfigError("sampling.train_fraction must lie in (0, 1)");
  }
}

SampleSet select(const Dataset& ds, const std::vector<std::size_t>& rows) {
  SampleSet s;
  s.phases.resize(static_cast<Eigen::Index>(rows.size()), ds.phases.cols());
  s.delta_lambda.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= ds.size()) throw InputError("sample index out of range");
    const auto src = static_cast<Eigen::Index>(rows[r]);
    s.phases.row(static_cast<Eigen::Index>(r)) = ds.phases.row(src);
    s.delta_lambda(static_cast<Eigen::Index>(r)) = ds.delta_lambda(src);
  }
  return s;
}

void split_dataset(Dataset& ds, double train_fraction, std::uint64_t seed) {
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, 0x73706c6974);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  ds.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.test.begin(), ds.test.end());
}

Dataset build_dataset(const RingBench& bench, const NoiseSpec& noise, const DatasetOptions& opts,
                      unsigned jobs) {
  validate(opts);
  validate(noise);
  const std::size_t n = opts.n_samples;
  const std::size_t p = bench.interfering().size();

  Dataset ds;
  ds.ring_id = bench.ring().name;
  for (PucId id : bench.interfering()) ds.puc_ids.push_back(id.index);
  ds.distances.assign(bench.distances().begin(), bench.distances().end());
  ds.fsr = bench.fsr();
  ds.options = opts;
  ds.noise = noise;

  auto sampled = sample_phase_vectors(n, p, opts.variance, opts.n_portions, opts.sampling_seed);
  ds.phases = std::move(sampled.phases);
  ds.warnings = std::move(sampled.warnings);
  ds.delta_lambda.resize(static_cast<Eigen::Index>(n));
  ds.corr1.resize(static_cast<Eigen::Index>(n));
  ds.corr2.resize(static_cast<Eigen::Index>(n));

  const DriftTrack drift(noise.drift_step_std_pm, noise.seed, 2 * n + 1);
  const std::vector<double> zeros(p, 0.0);

  parallel_for(n, jobs, [&](std::size_t j) {
    try {
      const auto row = static_cast<Eigen::Index>(j);
      std::vector<double> phases(p);
      for (std::size_t i = 0; i < p; ++i) phases[i] = ds.phases(row, static_cast<Eigen::Index>(i));
      const Spectrum before = bench.measure(zeros, noise, drift, 2 * j);
      const Spectrum meas = bench.measure(phases, noise, drift, 2 * j + 1);
      const Spectrum after = bench.measure(zeros, noise, drift, 2 * j + 2);
      const ShiftEstimate est = extract_shift(before, meas, after, bench.fsr());
      ds.delta_lambda(row) = est.delta_lambda;
      ds.corr1(row) = est.correlation_1;
      ds.corr2(row) = est.correlation_2;
    } catch (const std::exception& e) {
      throw std::runtime_error("sample " + std::to_string(j) + " of ring " + ds.ring_id + ": " +
                               e.what());
    }
  });

  split_dataset(ds, opts.train_fraction, opts.split_seed);
  return ds;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_dataset(const std::filesystem::path& csv_path, const Dataset& ds) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv_path.string());
    out << "sample_id";
    for (int id : ds.puc_ids) out << ",puc_" << id;
    out << ",delta_lambda_pm,corr1,corr2,split\n";
    std::vector<char> is_test(ds.size(), 0);
    for (std::size_t t : ds.test) is_test[t] = 1;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      const auto row = static_cast<Eigen::Index>(j);
      out << sample_name(j);
      for (Eigen::Index i = 0; i < ds.phases.cols(); ++i) out << ',' << format_number(ds.phases(row, i));
      out << ',' << format_number(ds.delta_lambda(row)) << ',' << format_number(ds.corr1(row)) << ','
          << format_number(ds.corr2(row)) << ',' << (is_test[j] ? "test" : "train") << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + csv_path.string());
  }

  nlohmann::ordered_json side;
  side["ring"] = ds.ring_id;
  side["fsr_pm"] = ds.fsr;
  side["puc_ids"] = ds.puc_ids;
  side["distances_mm"] = ds.distances;
  side["n_samples"] = ds.size();
  side["n_train"] = ds.train.size();
  side["n_test"] = ds.test.size();
  side["sampling"] = {{"variance", ds.options.variance},
                      {"n_portions", ds.options.n_portions},
                      {"train_fraction", ds.options.train_fraction},
                      {"sampling_seed", ds.options.sampling_seed},
                      {"split_seed", ds.options.split_seed}};
  side["noise"] = {{"amplitude_std_db", ds.noise.amplitude_std_db},
                   {"drift_step_std_pm", ds.noise.drift_step_std_pm},
                   {"seed", ds.noise.seed}};
  side["warnings"] = ds.warnings;
  const auto path = sidecar_path(csv_path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << side.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& csv_path) {
  const auto side_path = sidecar_path(csv_path);
  std::ifstream side_in(side_path, std::ios::binary);
  if (!side_in) throw InputError("missing dataset sidecar " + side_path.string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(side_in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(side_path.string() + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.ring_id = side.at("ring").get<std::string>();
    ds.fsr = side.at("fsr_pm").get<double>();
    ds.puc_ids = side.at("puc_ids").get<std::vector<int>>();
    ds.distances = side.at("distances_mm").get<std::vector<double>>();
    const auto& s = side.at("sampling");
    ds.options.n_samples = side.at("n_samples").get<std::size_t>();
    ds.options.variance = s.at("variance").get<double>();
    ds.options.n_portions = s.at("n_portions").get<std::size_t>();
    ds.options.train_fraction = s.at("train_fraction").get<double>();
    ds.options.sampling_seed = s.at("sampling_seed").get<std::uint64_t>();
    ds.options.split_seed = s.at("split_seed").get<std::uint64_t>();
    const auto& nz = side.at("noise");
    ds.noise.amplitude_std_db = nz.at("amplitude_std_db").get<double>();
    ds.noise.drift_step_std_pm = nz.at("drift_step_std_pm").get<double>();
    ds.noise.seed = nz.at("seed").get<std::uint64_t>();
    ds.warnings = side.value("warnings", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(side_path.string() + ": " + e.what());
  }
  if (ds.distances.size() != ds.puc_ids.size()) {
    throw InputError(side_path.string() + ": distances and puc_ids differ in length");
  }

  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset " + csv_path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(csv_path.string() + ": empty file");
  const auto header = csv::split(line);
  const std::size_t p = ds.puc_ids.size();
  if (header.size() != p + 5 || header[0] != "sample_id") {
    throw InputError(csv_path.string() + ": header does not match the sidecar");
  }
  for (std::size_t i = 0; i < p; ++i) {
    if (header[i + 1] != "puc_" + std::to_string(ds.puc_ids[i])) {
      throw InputError(csv_path.string() + ": column " + header[i + 1] + " does not match the sidecar");
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> y, c1, c2;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = csv::split(line);
    const std::string where = csv_path.string() + ":" + std::to_string(lineno);
    if (f.size() != header.size()) throw InputError(where + ": wrong number of columns");
    std::vector<double> ph(p);
    for (std::size_t i = 0; i < p; ++i) ph[i] = csv::parse_double(f[i + 1], where);
    rows.push_back(std::move(ph));
    y.push_back(csv::parse_double(f[p + 1], where));
    c1.push_back(csv::parse_double(f[p + 2], where));
    c2.push_back(csv::parse_double(f[p + 3], where));
    const std::size_t j = rows.size() - 1;
    if (f[p + 4] == "train") {
      ds.train.push_back(j);
    } else if (f[p + 4] == "test") {
      ds.test.push_back(j);
    } else {
      throw InputError(where + ": split must be train or test");
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.phases.resize(n, static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < p; ++i) {
      ds.phases(j, static_cast<Eigen::Index>(i)) = rows[static_cast<std::size_t>(j)][i];
    }
  }
  ds.delta_lambda = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  ds.corr1 = Eigen::Map<Eigen::VectorXd>(c1.data(), n);
  ds.corr2 = Eigen::Map<Eigen::VectorXd>(c2.data(), n);
  if (ds.size() != ds.options.n_samples) {
    throw InputError(csv_path.string() + ": row count differs from the sidecar");
  }
  return ds;
}

}  // namespace xtalk

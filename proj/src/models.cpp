#include "xtalk/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "xtalk/errors.hpp"
#include "xtalk/evaluation.hpp"
#include "xtalk/random.hpp"

namespace xtalk {

namespace {

constexpr double kInvPi = 1.0 / std::numbers::pi;

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": expected " + std::to_string(b) + " values, got " +
                     std::to_string(a));
  }
}

Eigen::VectorXd exp_profile(std::span<const double> d, double p2) {
  Eigen::VectorXd e(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) e(static_cast<Eigen::Index>(i)) = std::exp(-p2 * d[i]);
  return e;
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// Linear sub-problem of the ThDM at fixed p2.
struct ThdmInner {
  ThdmParams params;
  double rmse = 0.0;
  bool rank_deficient = false;
};

class ThdmProblem {
 public:
  ThdmProblem(const SampleSet& train, std::span<const double> distances)
      : x_(train.phases * kInvPi), y_(train.delta_lambda), d_(distances) {
    const Eigen::Map<const Eigen::VectorXd> dv(distances.data(), x_.cols());
    f2_ = x_ * dv;
    f3_ = x_.rowwise().sum();
  }

  ThdmInner solve(double p2) const {
    const auto n = x_.rows();
    Eigen::MatrixXd a(n, 3);
    a.col(0) = x_ * exp_profile(d_, p2);
    a.col(1) = f2_;
    a.col(2) = f3_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
    const Eigen::Vector3d c = cod.solve(y_);
    ThdmInner out;
    out.params = {c(0), p2, c(1), c(2)};
    out.rank_deficient = cod.rank() < 3;
    out.rmse = std::sqrt((a * c - y_).squaredNorm() / static_cast<double>(n));
    return out;
  }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::span<const double> d_;
  Eigen::VectorXd f2_;
  Eigen::VectorXd f3_;
};

double rmse_of(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
  return rmse(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
              std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

void add_flag(FittedModel& m, const std::string& f) {
  if (!m.has_flag(f)) m.flags.push_back(f);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Tpm: return "tpm";
    case ModelKind::Thdm: return "thdm";
    case ModelKind::Lr: return "lr";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "tpm") return ModelKind::Tpm;
  if (name == "thdm") return ModelKind::Thdm;
  if (name == "lr") return ModelKind::Lr;
  throw InputError("unknown model kind \"" + name + "\" (expected tpm, thdm or lr)");
}

bool FittedModel::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

double thdm_coefficient(const ThdmParams& p, double distance_mm) {
  return p.p1 * std::exp(-p.p2 * distance_mm) + p.p3 * distance_mm + p.p4;
}

double predict_tpm(const TpmParams& p, std::span<const double> phases) {
  return p.s * std::accumulate(phases.begin(), phases.end(), 0.0) * kInvPi;
}

double predict_thdm(const ThdmParams& p, std::span<const double> phases,
                    std::span<const double> distances) {
  check_lengths(distances.size(), phases.size(), "ThDM distances");
  double sum = 0.0;
  for (std::size_t i = 0; i < phases.size(); ++i) sum += thdm_coefficient(p, distances[i]) * phases[i];
  return sum * kInvPi;
}

double predict_lr(const LrParams& p, std::span<const double> phases) {
  check_lengths(phases.size(), p.weights.size(), "LR phases");
  double sum = 0.0;
  for (std::size_t i = 0; i < phases.size(); ++i) sum += p.weights[i] * phases[i];
  return sum * kInvPi;
}

Eigen::VectorXd predict_tpm(const TpmParams& p, const Eigen::MatrixXd& phases) {
  return phases.rowwise().sum() * (p.s * kInvPi);
}

Eigen::VectorXd predict_thdm(const ThdmParams& p, const Eigen::MatrixXd& phases,
                             std::span<const double> distances) {
  check_lengths(distances.size(), static_cast<std::size_t>(phases.cols()), "ThDM distances");
  Eigen::VectorXd coef(phases.cols());
  for (Eigen::Index i = 0; i < phases.cols(); ++i) {
    coef(i) = thdm_coefficient(p, distances[static_cast<std::size_t>(i)]);
  }
  return phases * coef * kInvPi;
}

Eigen::VectorXd predict_lr(const LrParams& p, const Eigen::MatrixXd& phases) {
  check_lengths(static_cast<std::size_t>(phases.cols()), p.weights.size(), "LR phases");
  return phases * as_vector(p.weights) * kInvPi;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g(25);
  for (std::size_t k = 0; k < g.size(); ++k) {
    g[k] = std::pow(10.0, -6.0 + 9.0 * static_cast<double>(k) / 24.0);
  }
  return g;
}

void validate(const ThdmOptions& o) {
  if (!(o.p2_min > 0.0 && o.p2_max > o.p2_min)) {
    throw ConfigError("models.thdm p2 range must satisfy 0 < p2_min < p2_max");
  }
  if (o.p2_points < 3) throw ConfigError("models.thdm.p2_points must be at least 3");
  if (!(o.rel_tol > 0.0 && o.rel_tol < 0.1)) throw ConfigError("models.thdm.rel_tol must lie in (0, 0.1)");
}

void validate(const LrOptions& o) {
  if (o.lambda_grid.empty()) throw ConfigError("models.lr.lambda_grid must not be empty");
  for (double l : o.lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("models.lr.lambda_grid values must be finite and >= 0");
  }
  if (o.folds < 2) throw ConfigError("models.lr.folds must be at least 2");
}

FittedModel fit_tpm(const SampleSet& train) {
  if (train.size() == 0) throw InputError("TPM fit needs at least one sample");
  const Eigen::VectorXd x = train.phases.rowwise().sum() * kInvPi;
  const double xx = x.squaredNorm();
  if (!(xx > 0.0)) throw DegenerateError("degenerate design: every training sample has zero total phase");
  FittedModel m;
  m.kind = ModelKind::Tpm;
  m.tpm.s = x.dot(train.delta_lambda) / xx;
  m.n_train = train.size();
  m.train_rmse = rmse_of(predict_tpm(m.tpm, train.phases), train.delta_lambda);
  return m;
}

FittedModel fit_thdm(const SampleSet& train, std::span<const double> distances,
                     const ThdmOptions& opts) {
  validate(opts);
  if (train.size() < 4) throw InputError("ThDM fit needs at least 4 samples");
  check_lengths(distances.size(), static_cast<std::size_t>(train.phases.cols()), "ThDM distances");

  const ThdmProblem problem(train, distances);
  FittedModel m;
  m.kind = ModelKind::Thdm;
  m.n_train = train.size();
  m.distances.assign(distances.begin(), distances.end());

  const double lmin = std::log(opts.p2_min);
  const double lmax = std::log(opts.p2_max);
  const std::size_t g = opts.p2_points;
  std::vector<double> grid(g);
  std::size_t best = 0;
  for (std::size_t k = 0; k < g; ++k) {
    grid[k] = std::exp(lmin + (lmax - lmin) * static_cast<double>(k) / static_cast<double>(g - 1));
    const ThdmInner r = problem.solve(grid[k]);
    m.p2_profile.push_back({grid[k], r.rmse});
    if (r.rmse < m.p2_profile[best].rmse) best = k;
  }
  if (best == 0 || best + 1 == g) add_flag(m, "decay-scale-unresolved");

  // Golden section in log p2 over the grid cells neighbouring the best point.
  double a = std::log(grid[best == 0 ? 0 : best - 1]);
  double b = std::log(grid[std::min(best + 1, g - 1)]);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double tol = std::log1p(opts.rel_tol);
  auto f = [&](double lp) { return problem.solve(std::exp(lp)).rmse; };
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  ThdmInner fit = problem.solve(std::exp(0.5 * (a + b)));
  const ThdmInner at_grid = problem.solve(grid[best]);
  if (at_grid.rmse < fit.rmse) fit = at_grid;
  if (fit.rank_deficient) add_flag(m, "rank-deficient");
  m.thdm = fit.params;
  m.train_rmse = rmse_of(predict_thdm(m.thdm, train.phases, distances), train.delta_lambda);
  return m;
}

LrParams ridge_solve(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
  if (!(lambda >= 0.0)) throw InputError("ridge lambda must be >= 0");
  LrParams p;
  p.regularization = lambda;
  Eigen::VectorXd w;
  if (lambda == 0.0) {
    w = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(x).solve(y);
  } else {
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(x.transpose() * y);
  }
  p.weights.assign(w.data(), w.data() + w.size());
  return p;
}

FittedModel fit_lr(const SampleSet& train, const LrOptions& opts) {
  validate(opts);
  const std::size_t n = train.size();
  if (n < 2) throw InputError("LR fit needs at least 2 samples");
  const auto p = train.phases.cols();
  const Eigen::MatrixXd x = train.phases * kInvPi;
  const Eigen::VectorXd& y = train.delta_lambda;

  FittedModel m;
  m.kind = ModelKind::Lr;
  m.n_train = n;
  m.fold_seed = opts.fold_seed;

  if ((y.array() == y(0)).all()) {
    m.lr.weights.assign(static_cast<std::size_t>(p), 0.0);
    m.flags.push_back("constant-target");
    m.train_rmse = rmse_of(predict_lr(m.lr, train.phases), y);
    return m;
  }

  std::size_t folds = opts.folds;
  if (n < folds) {
    folds = n;
    add_flag(m, "leave-one-out-cv");
  }
  const double scale = (x.transpose() * x).diagonal().mean();

  // Seeded shuffle, then contiguous blocks.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(opts.fold_seed, 0x666f6c64);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }

  const std::size_t L = opts.lambda_grid.size();
  std::vector<double> err(L, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t lo = n * f / folds;
    const std::size_t hi = n * (f + 1) / folds;
    const auto nv = static_cast<Eigen::Index>(hi - lo);
    const auto nt = static_cast<Eigen::Index>(n) - nv;
    Eigen::MatrixXd xt(nt, p), xv(nv, p);
    Eigen::VectorXd yt(nt), yv(nv);
    Eigen::Index it = 0, iv = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto src = static_cast<Eigen::Index>(order[r]);
      if (r >= lo && r < hi) {
        xv.row(iv) = x.row(src);
        yv(iv++) = y(src);
      } else {
        xt.row(it) = x.row(src);
        yt(it++) = y(src);
      }
    }
    // One eigendecomposition serves every lambda.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xt.transpose() * xt);
    const Eigen::VectorXd proj = eig.eigenvectors().transpose() * (xt.transpose() * yt);
    const Eigen::MatrixXd xv_v = xv * eig.eigenvectors();
    const double cutoff = eig.eigenvalues().cwiseAbs().maxCoeff() * 1e-12 * static_cast<double>(p);
    for (std::size_t k = 0; k < L; ++k) {
      const double lambda = opts.lambda_grid[k] * scale;
      Eigen::VectorXd z(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        const double ev = eig.eigenvalues()(j) + lambda;
        z(j) = ev > cutoff ? proj(j) / ev : 0.0;
      }
      err[k] += std::sqrt((xv_v * z - yv).squaredNorm() / static_cast<double>(nv));
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 0; k < L; ++k) {
    const double mean = err[k] / static_cast<double>(folds);
    m.cv_curve.push_back({opts.lambda_grid[k], opts.lambda_grid[k] * scale, mean});
    if (mean < m.cv_curve[best].rmse) best = k;
  }
  m.lr = ridge_solve(x, y, m.cv_curve[best].lambda);
  m.train_rmse = rmse_of(predict_lr(m.lr, train.phases), y);
  return m;
}

Eigen::VectorXd predict(const FittedModel& m, const Eigen::MatrixXd& phases,
                        std::span<const double> distances) {
  switch (m.kind) {
    case ModelKind::Tpm: return predict_tpm(m.tpm, phases);
    case ModelKind::Thdm: return predict_thdm(m.thdm, phases, distances);
    case ModelKind::Lr: return predict_lr(m.lr, phases);
  }
  throw InputError("unknown model kind");
}

double predict_one(const FittedModel& m, std::span<const double> phases,
                   std::span<const double> distances) {
  switch (m.kind) {
    case ModelKind::Tpm: return predict_tpm(m.tpm, phases);
    case ModelKind::Thdm: return predict_thdm(m.thdm, phases, distances);
    case ModelKind::Lr: return predict_lr(m.lr, phases);
  }
  throw InputError("unknown model kind");
}

FittedModel fit_model(ModelKind kind, const Dataset& ds, const ModelSettings& settings) {
  const SampleSet train = train_set(ds);
  FittedModel m;
  switch (kind) {
    case ModelKind::Tpm: m = fit_tpm(train); break;
    case ModelKind::Thdm: m = fit_thdm(train, ds.distances, settings.thdm); break;
    case ModelKind::Lr: m = fit_lr(train, settings.lr); break;
  }
  m.ring_id = ds.ring_id;
  m.puc_ids = ds.puc_ids;
  m.distances = ds.distances;
  if (!ds.test.empty()) {
    const SampleSet test = test_set(ds);
    m.test_rmse = rmse_of(predict(m, test.phases, ds.distances), test.delta_lambda);
    m.n_test = test.size();
  }
  return m;
}

nlohmann::ordered_json to_json(const FittedModel& m) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(m.kind);
  j["ring"] = m.ring_id;
  switch (m.kind) {
    case ModelKind::Tpm:
      j["units"] = {{"s", "pm/pi"}};
      j["params"] = {{"s", m.tpm.s}};
      break;
    case ModelKind::Thdm:
      j["units"] = {{"p1", "pm/pi"}, {"p2", "1/mm"}, {"p3", "pm/(pi mm)"}, {"p4", "pm/pi"}};
      j["params"] = {{"p1", m.thdm.p1}, {"p2", m.thdm.p2}, {"p3", m.thdm.p3}, {"p4", m.thdm.p4}};
      break;
    case ModelKind::Lr:
      j["units"] = {{"weights", "pm/pi"}, {"regularization", "pm^2/pi^2"}};
      j["params"] = {{"weights", m.lr.weights}, {"regularization", m.lr.regularization}};
      break;
  }
  j["train_rmse_pm"] = m.train_rmse;
  j["test_rmse_pm"] = m.test_rmse ? nlohmann::ordered_json(*m.test_rmse) : nlohmann::ordered_json();
  j["n_train"] = m.n_train;
  j["n_test"] = m.n_test;
  j["puc_ids"] = m.puc_ids;
  j["distances_mm"] = m.distances;
  if (m.kind == ModelKind::Lr) {
    auto curve = nlohmann::ordered_json::array();
    for (const auto& c : m.cv_curve) {
      curve.push_back({{"lambda_rel", c.lambda_rel}, {"lambda", c.lambda}, {"rmse_pm", c.rmse}});
    }
    j["cv_curve"] = curve;
    j["seeds"] = {{"fold_seed", m.fold_seed}};
  }
  if (m.kind == ModelKind::Thdm) {
    auto prof = nlohmann::ordered_json::array();
    for (const auto& p : m.p2_profile) prof.push_back({{"p2", p.p2}, {"rmse_pm", p.rmse}});
    j["p2_profile"] = prof;
  }
  j["flags"] = m.flags;
  return j;
}

FittedModel model_from_json(const nlohmann::json& j) {
  FittedModel m;
  try {
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.ring_id = j.at("ring").get<std::string>();
    const auto& p = j.at("params");
    switch (m.kind) {
      case ModelKind::Tpm: m.tpm.s = p.at("s").get<double>(); break;
      case ModelKind::Thdm:
        m.thdm = {p.at("p1").get<double>(), p.at("p2").get<double>(), p.at("p3").get<double>(),
                  p.at("p4").get<double>()};
        break;
      case ModelKind::Lr:
        m.lr.weights = p.at("weights").get<std::vector<double>>();
        m.lr.regularization = p.at("regularization").get<double>();
        break;
    }
    m.train_rmse = j.at("train_rmse_pm").get<double>();
    if (j.contains("test_rmse_pm") && !j.at("test_rmse_pm").is_null()) {
      m.test_rmse = j.at("test_rmse_pm").get<double>();
    }
    m.n_train = j.at("n_train").get<std::size_t>();
    m.n_test = j.at("n_test").get<std::size_t>();
    m.puc_ids = j.at("puc_ids").get<std::vector<int>>();
    m.distances = j.at("distances_mm").get<std::vector<double>>();
    if (j.contains("cv_curve")) {
      for (const auto& c : j.at("cv_curve")) {
        m.cv_curve.push_back({c.at("lambda_rel").get<double>(), c.at("lambda").get<double>(),
                              c.at("rmse_pm").get<double>()});
      }
    }
    if (j.contains("seeds")) m.fold_seed = j.at("seeds").at("fold_seed").get<std::uint64_t>();
    if (j.contains("p2_profile")) {
      for (const auto& q : j.at("p2_profile")) {
        m.p2_profile.push_back({q.at("p2").get<double>(), q.at("rmse_pm").get<double>()});
      }
    }
    m.flags = j.at("flags").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model JSON: ") + e.what());
  }
  return m;
}

void write_model(const std::filesystem::path& path, const FittedModel& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
}

FittedModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace xtalk

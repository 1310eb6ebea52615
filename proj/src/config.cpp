#include "xtalk/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "xtalk/errors.hpp"
#include "xtalk/random.hpp"

namespace xtalk {

namespace {

using json = nlohmann::json;

// Reads one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(full(key) + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  void read_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    double v = 0.0;
    read(key, v);
    out = v;
  }

  std::optional<Section> section(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), full(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(full(k) + ": unknown key");
    }
  }

 private:
  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Line of the innermost key of a dotted path, found by scanning the text.
std::optional<int> locate(const std::string& text, const std::string& path) {
  std::size_t pos = 0;
  std::size_t start = 0;
  bool found = false;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    const std::size_t hit = text.find("\"" + key + "\"", pos);
    if (hit == std::string::npos) break;
    pos = hit + key.size() + 2;
    found = true;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (!found) return std::nullopt;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

std::string leading_key(const std::string& msg) {
  std::size_t end = 0;
  while (end < msg.size() && (std::isalnum(static_cast<unsigned char>(msg[end])) || msg[end] == '_' ||
                              msg[end] == '.')) {
    ++end;
  }
  return msg.substr(0, end);
}

}  // namespace

std::uint64_t ring_stream(const std::string& ring_name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : ring_name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void validate(const ExperimentConfig& cfg) {
  if (!(cfg.mesh.unit_length_mm > 0.0)) throw ConfigError("mesh.unit_length_mm must be positive");
  if (cfg.mesh.rows < 1 || cfg.mesh.cols < 1) throw ConfigError("mesh.rows and mesh.cols must be positive");
  if (cfg.rings.empty()) throw ConfigError("rings must name at least one preset");
  const auto known = ring_preset_names();
  std::set<std::string> uniq;
  for (const auto& r : cfg.rings) {
    if (std::find(known.begin(), known.end(), r) == known.end()) {
      throw ConfigError("rings: unknown ring preset \"" + r + "\"");
    }
    if (!uniq.insert(r).second) throw ConfigError("rings: preset \"" + r + "\" listed twice");
  }
  if (cfg.optics.round_trip_amplitude &&
      !(*cfg.optics.round_trip_amplitude > 0.0 && *cfg.optics.round_trip_amplitude <= 1.0)) {
    throw ConfigError("optics.round_trip_amplitude must lie in (0, 1]");
  }
  if (!std::isfinite(cfg.optics.phase_offset)) throw ConfigError("optics.phase_offset must be finite");
  validate(cfg.ground_truth);
  validate(cfg.noise);
  validate(cfg.sampling);
  validate(cfg.models.thdm);
  validate(cfg.models.lr);
  if (cfg.sweep.sizes.empty()) throw ConfigError("sweep.sizes must not be empty");
  for (std::size_t k = 0; k < cfg.sweep.sizes.size(); ++k) {
    if (cfg.sweep.sizes[k] == 0 || (k > 0 && cfg.sweep.sizes[k] <= cfg.sweep.sizes[k - 1])) {
      throw ConfigError("sweep.sizes must be positive and strictly increasing");
    }
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(cfg.sampling.train_fraction * static_cast<double>(cfg.sampling.n_samples)));
  if (cfg.sweep.sizes.back() > n_train) {
    throw ConfigError("sweep.sizes: largest size " + std::to_string(cfg.sweep.sizes.back()) +
                      " exceeds the train split (" + std::to_string(n_train) + " samples)");
  }
  if (cfg.sweep.n_subsets == 0) throw ConfigError("sweep.n_subsets must be positive");
  if (cfg.compensation.n_samples == 0) throw ConfigError("compensation.n_samples must be positive");
  if (cfg.compensation.n_samples > cfg.sampling.n_samples - n_train) {
    throw ConfigError("compensation.n_samples exceeds the test split");
  }
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["mesh"] = {{"unit_length_mm", c.mesh.unit_length_mm}, {"rows", c.mesh.rows}, {"cols", c.mesh.cols}};
  j["rings"] = c.rings;
  j["optics"] = {{"phase_offset", c.optics.phase_offset},
                 {"round_trip_amplitude", c.optics.round_trip_amplitude
                                              ? nlohmann::ordered_json(*c.optics.round_trip_amplitude)
                                              : nlohmann::ordered_json()}};
  j["ground_truth"] = {{"g1", c.ground_truth.g1},
                       {"g2", c.ground_truth.g2},
                       {"g3", c.ground_truth.g3},
                       {"eta_std", c.ground_truth.eta_std},
                       {"seed", c.ground_truth.seed}};
  j["noise"] = {{"amplitude_std_db", c.noise.amplitude_std_db},
                {"drift_step_std_pm", c.noise.drift_step_std_pm},
                {"seed", c.noise.seed}};
  j["sampling"] = {{"n_samples", c.sampling.n_samples},
                   {"variance", c.sampling.variance},
                   {"n_portions", c.sampling.n_portions},
                   {"train_fraction", c.sampling.train_fraction},
                   {"sampling_seed", c.sampling.sampling_seed},
                   {"split_seed", c.sampling.split_seed}};
  j["models"] = {{"thdm",
                  {{"p2_min", c.models.thdm.p2_min},
                   {"p2_max", c.models.thdm.p2_max},
                   {"p2_points", c.models.thdm.p2_points},
                   {"rel_tol", c.models.thdm.rel_tol}}},
                 {"lr",
                  {{"lambda_grid", c.models.lr.lambda_grid},
                   {"folds", c.models.lr.folds},
                   {"fold_seed", c.models.lr.fold_seed}}}};
  j["sweep"] = {{"sizes", c.sweep.sizes}, {"n_subsets", c.sweep.n_subsets}, {"seed", c.sweep.seed}};
  j["compensation"] = {{"n_samples", c.compensation.n_samples}, {"seed", c.compensation.seed}};
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  Section root(j, "");
  if (auto s = root.section("mesh")) {
    s->read("unit_length_mm", c.mesh.unit_length_mm);
    s->read("rows", c.mesh.rows);
    s->read("cols", c.mesh.cols);
    s->finish();
  }
  root.read("rings", c.rings);
  if (auto s = root.section("optics")) {
    s->read("phase_offset", c.optics.phase_offset);
    s->read_optional("round_trip_amplitude", c.optics.round_trip_amplitude);
    s->finish();
  }
  if (auto s = root.section("ground_truth")) {
    s->read("g1", c.ground_truth.g1);
    s->read("g2", c.ground_truth.g2);
    s->read("g3", c.ground_truth.g3);
    s->read("eta_std", c.ground_truth.eta_std);
    s->read("seed", c.ground_truth.seed);
    s->finish();
  }
  if (auto s = root.section("noise")) {
    s->read("amplitude_std_db", c.noise.amplitude_std_db);
    s->read("drift_step_std_pm", c.noise.drift_step_std_pm);
    s->read("seed", c.noise.seed);
    s->finish();
  }
  if (auto s = root.section("sampling")) {
    s->read("n_samples", c.sampling.n_samples);
    s->read("variance", c.sampling.variance);
    s->read("n_portions", c.sampling.n_portions);
    s->read("train_fraction", c.sampling.train_fraction);
    s->read("sampling_seed", c.sampling.sampling_seed);
    s->read("split_seed", c.sampling.split_seed);
    s->finish();
  }
  if (auto s = root.section("models")) {
    if (auto t = s->section("thdm")) {
      t->read("p2_min", c.models.thdm.p2_min);
      t->read("p2_max", c.models.thdm.p2_max);
      t->read("p2_points", c.models.thdm.p2_points);
      t->read("rel_tol", c.models.thdm.rel_tol);
      t->finish();
    }
    if (auto l = s->section("lr")) {
      l->read("lambda_grid", c.models.lr.lambda_grid);
      l->read("folds", c.models.lr.folds);
      l->read("fold_seed", c.models.lr.fold_seed);
      l->finish();
    }
    s->finish();
  }
  if (auto s = root.section("sweep")) {
    s->read("sizes", c.sweep.sizes);
    s->read("n_subsets", c.sweep.n_subsets);
    s->read("seed", c.sweep.seed);
    s->finish();
  }
  if (auto s = root.section("compensation")) {
    s->read("n_samples", c.compensation.n_samples);
    s->read("seed", c.compensation.seed);
    s->finish();
  }
  root.read("output_dir", c.output_dir);
  root.finish();
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw ConfigError(origin + ":" + std::to_string(line) + ": syntax error: " + e.what());
  }
  try {
    ExperimentConfig cfg = config_from_json(j);
    validate(cfg);
    return cfg;
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto line = locate(text, leading_key(msg));
    throw ConfigError(origin + (line ? ":" + std::to_string(*line) : std::string()) + ": " + msg);
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

void override_seeds(ExperimentConfig& cfg, std::uint64_t master) {
  cfg.ground_truth.seed = derive_seed(master, 1);
  cfg.noise.seed = derive_seed(master, 2);
  cfg.sampling.sampling_seed = derive_seed(master, 3);
  cfg.sampling.split_seed = derive_seed(master, 4);
  cfg.models.lr.fold_seed = derive_seed(master, 5);
  cfg.sweep.seed = derive_seed(master, 6);
  cfg.compensation.seed = derive_seed(master, 7);
}

}  // namespace xtalk

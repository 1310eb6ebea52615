#include <doctest.h>

#include <set>
#include <string>

#include "xtalk/config.hpp"
#include "xtalk/errors.hpp"

using namespace xtalk;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("defaults round trip through JSON") {
  ExperimentConfig cfg;
  cfg.rings = {"mrr3", "mrr1"};
  cfg.sampling.n_samples = 1234;
  cfg.optics.round_trip_amplitude = 0.97;
  cfg.sweep.sizes = {10, 20, 30};
  const auto text = to_json(cfg).dump(2);
  const auto back = parse_config(text);
  CHECK(to_json(back).dump(2) == text);
  CHECK(back.rings == cfg.rings);
  CHECK(*back.optics.round_trip_amplitude == 0.97);
}

TEST_CASE("partial config keeps the defaults") {
  const auto cfg = parse_config(R"({"sampling": {"n_samples": 6000}})");
  CHECK(cfg.sampling.n_samples == 6000);
  CHECK(cfg.sampling.variance == 0.05);
  CHECK(cfg.rings.size() == 3);
  CHECK(cfg.sweep.sizes.back() == 4000);
}

TEST_CASE("unknown keys are rejected with their name") {
  const auto msg = error_of("{\n  \"sampling\": {\n    \"n_sample\": 10\n  }\n}\n");
  CHECK(contains(msg, "n_sample"));
  CHECK(contains(msg, "cfg.json:3"));
}

TEST_CASE("syntax errors carry the line") {
  const auto msg = error_of("{\n  \"rings\": [\"mrr1\",\n  ,]\n}\n");
  CHECK(contains(msg, "cfg.json:3"));
  CHECK(contains(msg, "syntax error"));
}

TEST_CASE("out of range values are rejected") {
  const auto var = error_of("{\n  \"sampling\": {\n    \"variance\": 0.3\n  }\n}\n");
  CHECK(contains(var, "variance"));
  CHECK(contains(var, "cfg.json:3"));
  CHECK(contains(error_of(R"({"rings": ["mrr1", "ring7"]})"), "ring7"));
  CHECK(contains(error_of(R"({"sweep": {"sizes": [100, 50]}})"), "sweep.sizes"));
  CHECK(contains(error_of(R"({"sampling": {"n_samples": 100}})"), "exceeds the train split"));
  CHECK(contains(error_of(R"({"optics": {"round_trip_amplitude": 1.2}})"), "round_trip_amplitude"));
  CHECK(contains(error_of(R"({"sampling": {"n_samples": "many"}})"), "n_samples"));
}

TEST_CASE("seed override replaces every seed") {
  ExperimentConfig a, b, c;
  override_seeds(a, 99);
  override_seeds(b, 99);
  override_seeds(c, 100);
  CHECK(to_json(a) == to_json(b));
  CHECK(to_json(a) != to_json(c));
  const std::set<std::uint64_t> seeds = {a.ground_truth.seed, a.noise.seed, a.sampling.sampling_seed,
                                         a.sampling.split_seed, a.models.lr.fold_seed, a.sweep.seed,
                                         a.compensation.seed};
  CHECK(seeds.size() == 7);
  CHECK(a.noise.seed != ExperimentConfig{}.noise.seed);
}

TEST_CASE("ring streams differ per ring") {
  CHECK(ring_stream("mrr1") != ring_stream("mrr2"));
  CHECK(ring_stream("mrr1") == ring_stream("mrr1"));
}

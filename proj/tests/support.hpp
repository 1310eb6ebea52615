#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "xtalk/ring_simulator.hpp"

namespace test_support {

inline constexpr double kPi = std::numbers::pi;

inline xtalk::RingBench default_bench(const std::string& ring = "mrr1", xtalk::CrosstalkLaw law = {}) {
  const auto mesh = xtalk::build_mesh();
  const auto rc = xtalk::make_ring(mesh, xtalk::ring_preset(ring));
  const auto phys = xtalk::derive_ring_physics(rc);
  return xtalk::RingBench(mesh, rc, phys, xtalk::GroundTruthCrosstalk(law, mesh.size()));
}

// Shift wrapped into (-fsr/2, fsr/2].
inline double wrap(double shift, double fsr) {
  double w = std::fmod(shift, fsr);
  if (w > fsr / 2) w -= fsr;
  if (w <= -fsr / 2) w += fsr;
  return w;
}

}  // namespace test_support

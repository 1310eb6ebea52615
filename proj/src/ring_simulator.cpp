#include "xtalk/ring_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "xtalk/errors.hpp"
#include "xtalk/random.hpp"

namespace xtalk {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPowerFloor = 1e-12;  // -120 dB, keeps log finite at perfect extinction

}  // namespace

void validate(const CrosstalkLaw& law) {
  if (!(law.g2 > 0.0)) throw ConfigError("ground_truth.g2 must be positive");
  if (!(law.g1 >= 0.0) || !(law.g3 >= 0.0)) {
    throw ConfigError("ground_truth.g1 and ground_truth.g3 must be non-negative");
  }
  if (!(law.eta_std >= 0.0 && law.eta_std < 0.5)) {
    throw ConfigError("ground_truth.eta_std must lie in [0, 0.5) so coefficients stay positive");
  }
}

GroundTruthCrosstalk::GroundTruthCrosstalk(const CrosstalkLaw& law, std::size_t n_pucs)
    : law_(law), eta_(n_pucs, 0.0) {
  validate(law);
  std::mt19937_64 rng{derive_seed(law.seed, 0x657461)};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& e : eta_) {
    e = std::clamp(normal(rng), -2.0, 2.0) * law.eta_std;
  }
}

double GroundTruthCrosstalk::perturbation(PucId id) const {
  if (id.index < 0 || static_cast<std::size_t>(id.index) >= eta_.size()) {
    throw InputError("PUC " + std::to_string(id.index) + " has no crosstalk coefficient");
  }
  return eta_[static_cast<std::size_t>(id.index)];
}

double GroundTruthCrosstalk::coefficient(PucId id, double distance_mm) const {
  return (law_.g1 * std::exp(-law_.g2 * distance_mm) + law_.g3) * (1.0 + perturbation(id));
}

double through_port_power(const RingPhysics& phys, double round_trip_phase) {
  const double r = phys.t1 * phys.t2 * phys.a;
  const double c = std::cos(round_trip_phase);
  const double t2a = phys.t2 * phys.a;
  const double num = phys.t1 * phys.t1 + t2a * t2a - 2.0 * r * c;
  const double den = 1.0 + r * r - 2.0 * r * c;
  return std::clamp(num / den, 0.0, 1.0);
}

double extinction_ratio_db(const RingPhysics& phys) {
  const double on = std::max(through_port_power(phys, 0.0), kPowerFloor);
  const double off = through_port_power(phys, std::numbers::pi);
  return 10.0 * std::log10(off / on);
}

RingPhysics derive_ring_physics(const RingConfig& ring, std::optional<double> round_trip_amplitude,
                                double phase_offset) {
  RingPhysics phys;
  phys.t1 = std::sqrt(1.0 - ring.io_coupler.ratio);
  phys.t2 = std::sqrt(1.0 - ring.drop_coupler.ratio);
  phys.fsr = ring.fsr;
  phys.center_wavelength = ring.center_wavelength;
  phys.phase_offset = phase_offset;
  const double target = ring.extinction_ratio_target;

  if (round_trip_amplitude) {
    if (!(*round_trip_amplitude > 0.0 && *round_trip_amplitude <= 1.0)) {
      throw ConfigError("ring \"" + ring.name + "\": round_trip_amplitude must lie in (0, 1]");
    }
    phys.a = *round_trip_amplitude;
  } else {
    auto er_at = [&](double a) {
      RingPhysics p = phys;
      p.a = a;
      return extinction_ratio_db(p);
    };
    // ER diverges at critical coupling t1 = t2 a and falls off on either side;
    // search the branch that reaches a = 1.
    double lo = 1e-6;
    double hi = 1.0;
    const bool critical_reachable = phys.t2 > 0.0 && phys.t1 / phys.t2 < 1.0;
    if (critical_reachable) lo = phys.t1 / phys.t2;
    // On [lo, 1] the ER is monotone: decreasing if the critical point is at lo,
    // increasing towards a = 1 otherwise.
    const bool decreasing = critical_reachable;
    if ((decreasing && er_at(hi) >= target) || (!decreasing && er_at(hi) <= target)) {
      phys.a = hi;
    } else {
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const bool above = er_at(mid) > target;
        if (above == decreasing) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      phys.a = 0.5 * (lo + hi);
    }
  }

  const double er = extinction_ratio_db(phys);
  if (std::abs(er - target) > kExtinctionToleranceDb) {
    std::ostringstream msg;
    msg << "ring \"" << ring.name << "\": simulated extinction ratio " << er
        << " dB is more than 3 dB from the target " << target << " dB";
    throw ConfigError(msg.str());
  }
  return phys;
}

void validate(const NoiseSpec& noise) {
  if (!(noise.amplitude_std_db >= 0.0)) throw ConfigError("noise.amplitude_std_db must be >= 0");
  if (!(noise.drift_step_std_pm >= 0.0)) throw ConfigError("noise.drift_step_std_pm must be >= 0");
}

DriftTrack::DriftTrack(double step_std_pm, std::uint64_t seed, std::size_t slots)
    : drift_(slots, 0.0) {
  if (!(step_std_pm >= 0.0)) throw InputError("drift step std must be >= 0");
  if (step_std_pm == 0.0) return;
  std::mt19937_64 rng{derive_seed(seed, 0x6472696674)};
  std::normal_distribution<double> step(0.0, step_std_pm);
  for (std::size_t t = 1; t < slots; ++t) drift_[t] = drift_[t - 1] + step(rng);
}

double DriftTrack::at(std::size_t slot) const {
  if (slot >= drift_.size()) {
    throw InputError("measurement slot " + std::to_string(slot) + " is beyond the drift track (" +
                     std::to_string(drift_.size()) + " slots)");
  }
  return drift_[slot];
}

RingBench::RingBench(MeshTopology mesh, RingConfig ring, RingPhysics physics,
                     const GroundTruthCrosstalk& truth, SpectrumGrid grid)
    : mesh_(std::move(mesh)), ring_(std::move(ring)), physics_(physics), grid_(grid) {
  validate_ring(mesh_, ring_);
  interfering_ = interfering_pucs(mesh_, ring_);
  distances_ = ring_distances(mesh_, ring_, interfering_);
  coefficients_.reserve(interfering_.size());
  for (std::size_t i = 0; i < interfering_.size(); ++i) {
    coefficients_.push_back(truth.coefficient(interfering_[i], distances_[i]));
  }
  sample_count(grid_.start, grid_.stop, grid_.step);
}

void RingBench::check_phases(std::span<const double> phases) const {
  if (phases.size() != interfering_.size()) {
    throw InputError("ring \"" + ring_.name + "\" has " + std::to_string(interfering_.size()) +
                     " interfering PUCs but " + std::to_string(phases.size()) +
                     " phases were given");
  }
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (!(phases[i] >= 0.0 && phases[i] <= kTwoPi)) {
      throw InputError("phase for PUC " + std::to_string(interfering_[i].index) +
                       " is outside [0, 2pi]");
    }
  }
}

double RingBench::true_shift(std::span<const double> phases) const {
  check_phases(phases);
  double sum = 0.0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    sum += coefficients_[i] * phases[i] / std::numbers::pi;
  }
  return sum;
}

Spectrum RingBench::render(double shift_pm, double loop_phase) const {
  Spectrum s;
  s.start_wavelength = grid_.start;
  s.step = grid_.step;
  const std::size_t n = sample_count(grid_.start, grid_.stop, grid_.step);
  s.power.resize(n);
  const double fsr = physics_.fsr;
  for (std::size_t i = 0; i < n; ++i) {
    const double offset_pm = (s.wavelength(i) - physics_.center_wavelength) * 1e3;
    // Heating adds round-trip phase and red-shifts the resonances.
    const double phi = physics_.phase_offset - kTwoPi * (offset_pm - shift_pm) / fsr + loop_phase;
    s.power[i] = 10.0 * std::log10(std::max(through_port_power(physics_, phi), kPowerFloor));
  }
  return s;
}

Spectrum RingBench::measure(std::span<const double> phases, const NoiseSpec& noise,
                            const DriftTrack& drift, std::size_t slot, double loop_phase) const {
  const double shift = true_shift(phases) + drift.at(slot);
  Spectrum s = render(shift, loop_phase);
  if (noise.amplitude_std_db > 0.0) {
    auto rng = make_rng(noise.seed, slot);
    std::normal_distribution<double> amp(0.0, noise.amplitude_std_db);
    for (auto& p : s.power) p += amp(rng);
  }
  return s;
}

double ground_truth_shift(const GroundTruthCrosstalk& truth, const MeshTopology& mesh,
                          const RingConfig& ring, std::span<const double> phases) {
  const auto inter = interfering_pucs(mesh, ring);
  if (phases.size() != inter.size()) {
    throw InputError("expected " + std::to_string(inter.size()) + " phases, got " +
                     std::to_string(phases.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < inter.size(); ++i) {
    if (!(phases[i] >= 0.0 && phases[i] <= kTwoPi)) {
      throw InputError("phase outside [0, 2pi]");
    }
    sum += truth.coefficient(inter[i], distance_to_ring(mesh, ring, inter[i])) * phases[i] /
           std::numbers::pi;
  }
  return sum;
}

Spectrum measure_spectrum(const MeshTopology& mesh, const RingConfig& ring,
                          const RingPhysics& physics, const GroundTruthCrosstalk& truth,
                          std::span<const double> phases, const NoiseSpec& noise,
                          const DriftTrack& drift, std::size_t time_index) {
  const RingBench bench(mesh, ring, physics, truth);
  return bench.measure(phases, noise, drift, time_index);
}

}  // namespace xtalk

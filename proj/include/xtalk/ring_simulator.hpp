#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "xtalk/mesh.hpp"
#include "xtalk/spectrum.hpp"

namespace xtalk {

// Phenomenological crosstalk law of the simulated chip:
//   c_i = (g1 * exp(-g2 * d_i) + g3) * (1 + eta_i)   [pm/pi]
// with eta_i ~ N(0, eta_std) clamped to +-2 eta_std, drawn once per PUC.
struct CrosstalkLaw {
  double g1 = 1.0;        // pm/pi
  double g2 = 0.9;        // 1/mm
  double g3 = 0.14;       // pm/pi
  double eta_std = 0.10;  // dimensionless
  std::uint64_t seed = 1;
};

void validate(const CrosstalkLaw& law);

class GroundTruthCrosstalk {
 public:
  explicit GroundTruthCrosstalk(const CrosstalkLaw& law, std::size_t n_pucs = kPucCount);

  const CrosstalkLaw& law() const { return law_; }
  double perturbation(PucId id) const;
  std::span<const double> perturbations() const { return eta_; }
  double coefficient(PucId id, double distance_mm) const;  // pm/pi

 private:
  CrosstalkLaw law_;
  std::vector<double> eta_;
};

struct RingPhysics {
  double t1 = 0.0;  // self-coupling amplitude, input/through coupler
  double t2 = 0.0;  // self-coupling amplitude, drop coupler
  double a = 1.0;   // round-trip amplitude transmission
  double phase_offset = 0.0;          // rad, round-trip phase at the center wavelength
  double fsr = kDefaultFsrPm;         // pm
  double center_wavelength = kCenterWavelengthNm;  // nm
};

inline constexpr double kDefaultPhaseOffset = 0.7;
inline constexpr double kExtinctionToleranceDb = 3.0;

// Add-drop through port: (t1^2 + t2^2 a^2 - 2 t1 t2 a cos phi) / (1 + t1^2 t2^2 a^2 - 2 t1 t2 a cos phi).
double through_port_power(const RingPhysics& phys, double round_trip_phase);

double extinction_ratio_db(const RingPhysics& phys);

// Self-coupling t = sqrt(1 - ratio). Unless `round_trip_amplitude` is given,
// the loss is solved on the low-loss side of critical coupling so that the
// extinction ratio matches the ring's target. Throws ConfigError when the
// result is more than 3 dB from the target.
RingPhysics derive_ring_physics(const RingConfig& ring,
                                std::optional<double> round_trip_amplitude = std::nullopt,
                                double phase_offset = kDefaultPhaseOffset);

struct NoiseSpec {
  double amplitude_std_db = 0.1;
  double drift_step_std_pm = 0.28;
  std::uint64_t seed = 2;

  static NoiseSpec noiseless() { return {0.0, 0.0, 0}; }
};

void validate(const NoiseSpec& noise);

// Slow wavelength drift: a random walk over measurement slots, starting at 0.
class DriftTrack {
 public:
  DriftTrack(double step_std_pm, std::uint64_t seed, std::size_t slots);
  static DriftTrack none(std::size_t slots) { return DriftTrack(0.0, 0, slots); }

  double at(std::size_t slot) const;  // pm
  std::size_t size() const { return drift_.size(); }

 private:
  std::vector<double> drift_;
};

struct SpectrumGrid {
  double start = kSpanStartNm;  // nm
  double stop = kSpanStopNm;    // nm
  double step = kRawStepPm;     // pm
};

// One programmed ring on the simulated chip: geometry, optics and the
// crosstalk coefficients of its interfering PUCs. Immutable.
class RingBench {
 public:
  RingBench(MeshTopology mesh, RingConfig ring, RingPhysics physics,
            const GroundTruthCrosstalk& truth, SpectrumGrid grid = {});

  const MeshTopology& mesh() const { return mesh_; }
  const RingConfig& ring() const { return ring_; }
  const RingPhysics& physics() const { return physics_; }
  const SpectrumGrid& grid() const { return grid_; }
  std::span<const PucId> interfering() const { return interfering_; }
  std::span<const double> distances() const { return distances_; }
  std::span<const double> coefficients() const { return coefficients_; }
  double fsr() const { return physics_.fsr; }

  // Sum of c_i * phase_i / pi, pm. Phases aligned with interfering().
  double true_shift(std::span<const double> phases) const;

  // Noiseless spectrum with the resonances moved by `shift_pm` and an extra
  // round-trip phase `loop_phase` (rad) applied by the loop PUCs.
  Spectrum render(double shift_pm, double loop_phase = 0.0) const;

  // One measurement slot: crosstalk from `phases`, drift at `slot`, amplitude
  // noise seeded by (noise.seed, slot).
  Spectrum measure(std::span<const double> phases, const NoiseSpec& noise,
                   const DriftTrack& drift, std::size_t slot, double loop_phase = 0.0) const;

  void check_phases(std::span<const double> phases) const;

 private:
  MeshTopology mesh_;
  RingConfig ring_;
  RingPhysics physics_;
  SpectrumGrid grid_;
  std::vector<PucId> interfering_;
  std::vector<double> distances_;
  std::vector<double> coefficients_;
};

double ground_truth_shift(const GroundTruthCrosstalk& truth, const MeshTopology& mesh,
                          const RingConfig& ring, std::span<const double> phases);

Spectrum measure_spectrum(const MeshTopology& mesh, const RingConfig& ring,
                          const RingPhysics& physics, const GroundTruthCrosstalk& truth,
                          std::span<const double> phases, const NoiseSpec& noise,
                          const DriftTrack& drift, std::size_t time_index);

}  // namespace xtalk

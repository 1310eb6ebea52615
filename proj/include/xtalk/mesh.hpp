#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace xtalk {

inline constexpr double kDefaultUnitLengthMm = 0.81141;
inline constexpr int kDefaultMeshRows = 4;
inline constexpr int kDefaultMeshCols = 5;
inline constexpr std::size_t kPucCount = 72;
inline constexpr double kCenterWavelengthNm = 1550.0;
inline constexpr double kDefaultFsrPm = 118.4;

struct PucId {
  int index = 0;
  auto operator<=>(const PucId&) const = default;
};

struct Point2 {
  double x = 0.0;  // mm
  double y = 0.0;  // mm
};

// Offset coordinates of a hexagonal cell (pointy-top, odd rows shifted right).
struct HexCell {
  int row = 0;
  int col = 0;
  auto operator<=>(const HexCell&) const = default;
};

namespace puc_state {
struct Bar {};
struct Cross {};
struct TunableCoupler {
  double coupling_ratio = 0.0;  // fraction of power cross-coupled
};
// Both arms of the MZI driven with the same phase, so the splitting ratio
// is unchanged and only heat is added.
struct Interfering {
  double phase = 0.0;  // rad
};
}  // namespace puc_state

using PucState = std::variant<puc_state::Bar, puc_state::Cross, puc_state::TunableCoupler,
                              puc_state::Interfering>;

// Throws InputError if the ratio or phase is out of range.
void validate_state(const PucState& state);

enum class GuideState { Bar, Cross };

std::string to_string(GuideState s);
GuideState guide_state_from_string(const std::string& s);

// 72-PUC hexagonal waveguide mesh. Each PUC is one hexagon edge; its
// position is the edge midpoint. Immutable after construction.
class MeshTopology {
 public:
  double unit_length() const { return unit_length_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return positions_.size(); }

  const Point2& position(PucId id) const;
  std::span<const Point2> positions() const { return positions_; }

  // PUCs forming the given cell, indexed by side (side k joins the corners
  // at 30 + 60k and 90 + 60k degrees). Empty when the cell is outside the
  // tiling or one of its edges was trimmed.
  std::optional<std::array<PucId, 6>> hexagon(HexCell cell) const;

  // Cells bordering a PUC (one for boundary edges, two otherwise).
  std::vector<HexCell> cells_of(PucId id) const;

  bool shares_vertex(PucId a, PucId b) const;

  void check(PucId id) const;

 private:
  friend MeshTopology build_mesh(double unit_length, int rows, int cols);

  struct Vertex {
    int x = 0;  // units of sqrt(3)/2 * unit_length
    int y = 0;  // units of unit_length / 2
    auto operator<=>(const Vertex&) const = default;
  };
  struct Edge {
    std::array<Vertex, 2> ends;
    std::vector<std::pair<HexCell, int>> sides;
  };

  double unit_length_ = kDefaultUnitLengthMm;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Point2> positions_;
  std::vector<Edge> edges_;
};

// Deterministic layout: all edges of a rows x cols tiling, trimmed to the
// 72 closest to the tiling centroid, numbered in raster order (y, then x).
MeshTopology build_mesh(double unit_length = kDefaultUnitLengthMm, int rows = kDefaultMeshRows,
                        int cols = kDefaultMeshCols);

// Euclidean distance between PUC midpoints, mm. Distance to self is an error.
double puc_distance(const MeshTopology& mesh, PucId a, PucId b);

struct Coupler {
  PucId puc;
  double ratio = 0.0;
};

struct GuidingPuc {
  PucId puc;
  GuideState state = GuideState::Bar;
};

struct RingConfig {
  std::string name;
  std::array<PucId, 6> loop_pucs{};
  Coupler io_coupler;
  Coupler drop_coupler;
  std::vector<GuidingPuc> guiding_pucs;
  double round_trip_length = 0.0;  // mm
  double group_index = 0.0;
  double fsr = kDefaultFsrPm;  // pm
  double extinction_ratio_target = 25.0;  // dB
  double center_wavelength = kCenterWavelengthNm;  // nm
};

// FSR = lambda^2 / (n_g L), with lambda in nm, L in mm and the FSR in pm.
double fsr_from_group_index(double wavelength_nm, double group_index, double length_mm);
double group_index_from_fsr(double wavelength_nm, double fsr_pm, double length_mm);

struct GuideSpec {
  HexCell cell;
  int side = 0;
  GuideState state = GuideState::Bar;
};

// Cell-level description of a ring; resolved against a mesh by make_ring.
struct RingPlacement {
  std::string name;
  HexCell cell;
  int io_side = 0;
  double io_ratio = 0.9;
  int drop_side = 3;
  double drop_ratio = 0.77;
  std::vector<GuideSpec> guiding;
  double extinction_ratio_target = 25.0;  // dB
  double fsr = kDefaultFsrPm;  // pm
  double center_wavelength = kCenterWavelengthNm;  // nm
};

std::vector<std::string> ring_preset_names();

// "mrr1", "mrr2", "mrr3". Throws ConfigError naming an unknown preset.
RingPlacement ring_preset(const std::string& name);

RingConfig make_ring(const MeshTopology& mesh, const RingPlacement& placement);

// Throws ConfigError on any broken RingConfig invariant.
void validate_ring(const MeshTopology& mesh, const RingConfig& ring);

// Mean of the distances from p to the six loop PUCs, mm.
double distance_to_ring(const MeshTopology& mesh, const RingConfig& ring, PucId p);

// Every PUC except loop and guiding PUCs, ascending.
std::vector<PucId> interfering_pucs(const MeshTopology& mesh, const RingConfig& ring);

std::vector<double> ring_distances(const MeshTopology& mesh, const RingConfig& ring,
                                   std::span<const PucId> pucs);

// Full per-PUC state table for a ring with the given interfering phases.
std::vector<PucState> program_states(const MeshTopology& mesh, const RingConfig& ring,
                                     std::span<const double> interfering_phases);

}  // namespace xtalk

#include "xtalk/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "xtalk/errors.hpp"

namespace xtalk {

namespace {

// Corner k of a cell sits at 30 + 60k degrees; offsets in lattice units
// (x: sqrt(3)/2 * L, y: L/2).
constexpr std::array<std::array<int, 2>, 6> kCornerOffset{{
    {+1, +1}, {0, +2}, {-1, +1}, {-1, -1}, {0, -2}, {+1, -1}}};

struct LatticeVertex {
  int x;
  int y;
  auto operator<=>(const LatticeVertex&) const = default;
};

using EdgeKey = std::pair<LatticeVertex, LatticeVertex>;

LatticeVertex corner(HexCell cell, int k) {
  const int cx = 2 * cell.col + (cell.row & 1);
  const int cy = 3 * cell.row;
  return {cx + kCornerOffset[k][0], cy + kCornerOffset[k][1]};
}

EdgeKey side_key(HexCell cell, int side) {
  auto a = corner(cell, side);
  auto b = corner(cell, (side + 1) % 6);
  if (b < a) std::swap(a, b);
  return {a, b};
}

std::string puc_name(PucId id) { return "PUC " + std::to_string(id.index); }

}  // namespace

void validate_state(const PucState& state) {
  if (const auto* c = std::get_if<puc_state::TunableCoupler>(&state)) {
    if (!(c->coupling_ratio >= 0.0 && c->coupling_ratio <= 1.0)) {
      throw InputError("coupling ratio must lie in [0, 1]");
    }
  }
  if (const auto* p = std::get_if<puc_state::Interfering>(&state)) {
    if (!(p->phase >= 0.0 && p->phase <= 2.0 * std::numbers::pi)) {
      throw InputError("interfering phase must lie in [0, 2pi]");
    }
  }
}

std::string to_string(GuideState s) { return s == GuideState::Bar ? "bar" : "cross"; }

GuideState guide_state_from_string(const std::string& s) {
  if (s == "bar") return GuideState::Bar;
  if (s == "cross") return GuideState::Cross;
  throw ConfigError("guiding state must be \"bar\" or \"cross\", got \"" + s + "\"");
}

const Point2& MeshTopology::position(PucId id) const {
  check(id);
  return positions_[static_cast<std::size_t>(id.index)];
}

void MeshTopology::check(PucId id) const {
  if (id.index < 0 || static_cast<std::size_t>(id.index) >= positions_.size()) {
    throw InputError(puc_name(id) + " is outside the mesh (0.." +
                     std::to_string(positions_.size() - 1) + ")");
  }
}

std::optional<std::array<PucId, 6>> MeshTopology::hexagon(HexCell cell) const {
  if (cell.row < 0 || cell.row >= rows_ || cell.col < 0 || cell.col >= cols_) return std::nullopt;
  std::array<PucId, 6> out{};
  for (int side = 0; side < 6; ++side) {
    const auto key = side_key(cell, side);
    const auto it = std::find_if(edges_.begin(), edges_.end(), [&](const Edge& e) {
      return e.ends[0].x == key.first.x && e.ends[0].y == key.first.y &&
             e.ends[1].x == key.second.x && e.ends[1].y == key.second.y;
    });
    if (it == edges_.end()) return std::nullopt;
    out[side] = PucId{static_cast<int>(it - edges_.begin())};
  }
  return out;
}

std::vector<HexCell> MeshTopology::cells_of(PucId id) const {
  check(id);
  std::vector<HexCell> out;
  for (const auto& [cell, side] : edges_[static_cast<std::size_t>(id.index)].sides) {
    out.push_back(cell);
  }
  return out;
}

bool MeshTopology::shares_vertex(PucId a, PucId b) const {
  check(a);
  check(b);
  const auto& ea = edges_[static_cast<std::size_t>(a.index)].ends;
  const auto& eb = edges_[static_cast<std::size_t>(b.index)].ends;
  for (const auto& va : ea) {
    for (const auto& vb : eb) {
      if (va == vb) return true;
    }
  }
  return false;
}

MeshTopology build_mesh(double unit_length, int rows, int cols) {
  if (!(unit_length > 0.0) || !std::isfinite(unit_length)) {
    throw ConfigError("mesh unit_length must be a positive length in mm");
  }
  if (rows < 1 || cols < 1) {
    throw ConfigError("mesh tiling needs at least one row and one column");
  }

  std::map<EdgeKey, std::vector<std::pair<HexCell, int>>> all;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (int side = 0; side < 6; ++side) {
        all[side_key({r, c}, side)].emplace_back(HexCell{r, c}, side);
      }
    }
  }
  if (all.size() < kPucCount) {
    std::ostringstream msg;
    msg << "a " << rows << "x" << cols << " tiling has only " << all.size()
        << " hexagon edges; at least " << kPucCount << " are required";
    throw ConfigError(msg.str());
  }

  struct Candidate {
    EdgeKey key;
    std::int64_t mx;  // twice the midpoint, lattice units
    std::int64_t my;
    std::int64_t dist2 = 0;
  };
  std::vector<Candidate> cand;
  cand.reserve(all.size());
  std::int64_t sum_x = 0;
  std::int64_t sum_y = 0;
  for (const auto& [key, sides] : all) {
    const Candidate c{key, key.first.x + key.second.x, key.first.y + key.second.y};
    sum_x += c.mx;
    sum_y += c.my;
    cand.push_back(c);
  }
  const auto n = static_cast<std::int64_t>(cand.size());
  for (auto& c : cand) {
    const std::int64_t dx = n * c.mx - sum_x;
    const std::int64_t dy = n * c.my - sum_y;
    c.dist2 = 3 * dx * dx + dy * dy;
  }
  std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.dist2, a.my, a.mx) < std::tie(b.dist2, b.my, b.mx);
  });
  cand.resize(kPucCount);
  std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.my, a.mx) < std::tie(b.my, b.mx);
  });

  MeshTopology mesh;
  mesh.unit_length_ = unit_length;
  mesh.rows_ = rows;
  mesh.cols_ = cols;
  const double sx = std::numbers::sqrt3 * unit_length / 4.0;
  const double sy = unit_length / 4.0;
  for (const auto& c : cand) {
    mesh.positions_.push_back({static_cast<double>(c.mx) * sx, static_cast<double>(c.my) * sy});
    MeshTopology::Edge e;
    e.ends = {MeshTopology::Vertex{c.key.first.x, c.key.first.y},
              MeshTopology::Vertex{c.key.second.x, c.key.second.y}};
    e.sides = all.at(c.key);
    mesh.edges_.push_back(std::move(e));
  }
  return mesh;
}

double puc_distance(const MeshTopology& mesh, PucId a, PucId b) {
  if (a == b) throw InputError("distance from " + puc_name(a) + " to itself is undefined");
  const auto& pa = mesh.position(a);
  const auto& pb = mesh.position(b);
  return std::hypot(pa.x - pb.x, pa.y - pb.y);
}

double fsr_from_group_index(double wavelength_nm, double group_index, double length_mm) {
  return wavelength_nm * wavelength_nm * 1e-3 / (group_index * length_mm);
}

double group_index_from_fsr(double wavelength_nm, double fsr_pm, double length_mm) {
  return wavelength_nm * wavelength_nm * 1e-3 / (fsr_pm * length_mm);
}

std::vector<std::string> ring_preset_names() { return {"mrr1", "mrr2", "mrr3"}; }

RingPlacement ring_preset(const std::string& name) {
  RingPlacement p;
  p.name = name;
  if (name == "mrr1") {
    p.cell = {1, 2};
    p.io_side = 4;
    p.drop_side = 1;
    p.extinction_ratio_target = 25.0;
  } else if (name == "mrr2") {
    p.cell = {0, 1};
    p.io_side = 4;
    p.drop_side = 1;
    p.extinction_ratio_target = 20.0;
  } else if (name == "mrr3") {
    // Point-symmetric to mrr1; the light is routed to the ports through
    // eight fixed PUCs below the ring.
    p.cell = {2, 2};
    p.io_side = 1;
    p.drop_side = 4;
    p.extinction_ratio_target = 30.0;
    using enum GuideState;
    p.guiding = {{{2, 1}, 0, Bar},   {{2, 3}, 1, Bar},   {{2, 1}, 1, Cross}, {{3, 0}, 5, Cross},
                 {{3, 1}, 5, Cross}, {{3, 2}, 5, Cross}, {{3, 1}, 0, Cross}, {{3, 2}, 1, Cross}};
  } else {
    throw ConfigError("unknown ring preset \"" + name + "\" (known: mrr1, mrr2, mrr3)");
  }
  return p;
}

RingConfig make_ring(const MeshTopology& mesh, const RingPlacement& placement) {
  const auto loop = mesh.hexagon(placement.cell);
  if (!loop) {
    throw ConfigError("ring \"" + placement.name + "\": cell (" +
                      std::to_string(placement.cell.row) + ", " +
                      std::to_string(placement.cell.col) + ") is not a complete hexagon of the mesh");
  }
  auto side_ok = [](int s) { return s >= 0 && s < 6; };
  if (!side_ok(placement.io_side) || !side_ok(placement.drop_side)) {
    throw ConfigError("ring \"" + placement.name + "\": coupler sides must be in 0..5");
  }
  RingConfig ring;
  ring.name = placement.name;
  ring.loop_pucs = *loop;
  ring.io_coupler = {(*loop)[static_cast<std::size_t>(placement.io_side)], placement.io_ratio};
  ring.drop_coupler = {(*loop)[static_cast<std::size_t>(placement.drop_side)],
                       placement.drop_ratio};
  for (const auto& g : placement.guiding) {
    const auto hex = mesh.hexagon(g.cell);
    if (!hex || !side_ok(g.side)) {
      throw ConfigError("ring \"" + placement.name + "\": guiding PUC at cell (" +
                        std::to_string(g.cell.row) + ", " + std::to_string(g.cell.col) +
                        ") side " + std::to_string(g.side) + " is not part of the mesh");
    }
    ring.guiding_pucs.push_back({(*hex)[static_cast<std::size_t>(g.side)], g.state});
  }
  ring.round_trip_length = 6.0 * mesh.unit_length();
  ring.fsr = placement.fsr;
  ring.center_wavelength = placement.center_wavelength;
  ring.group_index =
      group_index_from_fsr(placement.center_wavelength, placement.fsr, ring.round_trip_length);
  ring.extinction_ratio_target = placement.extinction_ratio_target;
  validate_ring(mesh, ring);
  return ring;
}

void validate_ring(const MeshTopology& mesh, const RingConfig& ring) {
  const std::string who = "ring \"" + ring.name + "\": ";
  std::set<PucId> loop;
  for (auto p : ring.loop_pucs) {
    mesh.check(p);
    loop.insert(p);
  }
  if (loop.size() != 6) throw ConfigError(who + "loop PUCs must be distinct");
  for (const auto* c : {&ring.io_coupler, &ring.drop_coupler}) {
    if (!loop.contains(c->puc)) throw ConfigError(who + "couplers must be loop PUCs");
    if (!(c->ratio >= 0.0 && c->ratio <= 1.0)) {
      throw ConfigError(who + "coupling ratios must lie in [0, 1]");
    }
  }
  if (ring.io_coupler.puc == ring.drop_coupler.puc) {
    throw ConfigError(who + "input and drop couplers must be different PUCs");
  }
  std::set<PucId> guiding;
  for (const auto& g : ring.guiding_pucs) {
    mesh.check(g.puc);
    if (loop.contains(g.puc)) throw ConfigError(who + "guiding PUCs must not be loop PUCs");
    if (!guiding.insert(g.puc).second) throw ConfigError(who + "guiding PUCs must be distinct");
  }
  if (std::abs(ring.round_trip_length - 6.0 * mesh.unit_length()) > 1e-12) {
    throw ConfigError(who + "round-trip length must be six unit lengths");
  }
  if (!(ring.fsr > 0.0)) throw ConfigError(who + "fsr must be positive");
  if (!(ring.group_index > 0.0)) throw ConfigError(who + "group index must be positive");
  const double implied =
      fsr_from_group_index(ring.center_wavelength, ring.group_index, ring.round_trip_length);
  if (std::abs(implied - ring.fsr) > 1e-3 * ring.fsr) {
    throw ConfigError(who + "fsr is inconsistent with group index and round-trip length");
  }
}

double distance_to_ring(const MeshTopology& mesh, const RingConfig& ring, PucId p) {
  mesh.check(p);
  double sum = 0.0;
  for (auto q : ring.loop_pucs) {
    if (q == p) {
      throw InputError(puc_name(p) + " belongs to the loop of ring \"" + ring.name + "\"");
    }
    sum += puc_distance(mesh, p, q);
  }
  return sum / 6.0;
}

std::vector<PucId> interfering_pucs(const MeshTopology& mesh, const RingConfig& ring) {
  std::set<PucId> excluded(ring.loop_pucs.begin(), ring.loop_pucs.end());
  for (const auto& g : ring.guiding_pucs) excluded.insert(g.puc);
  std::vector<PucId> out;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const PucId id{static_cast<int>(i)};
    if (!excluded.contains(id)) out.push_back(id);
  }
  return out;
}

std::vector<double> ring_distances(const MeshTopology& mesh, const RingConfig& ring,
                                   std::span<const PucId> pucs) {
  std::vector<double> out;
  out.reserve(pucs.size());
  for (auto p : pucs) out.push_back(distance_to_ring(mesh, ring, p));
  return out;
}

std::vector<PucState> program_states(const MeshTopology& mesh, const RingConfig& ring,
                                     std::span<const double> interfering_phases) {
  const auto inter = interfering_pucs(mesh, ring);
  if (interfering_phases.size() != inter.size()) {
    throw InputError("expected " + std::to_string(inter.size()) + " interfering phases, got " +
                     std::to_string(interfering_phases.size()));
  }
  std::vector<PucState> states(mesh.size(), puc_state::Bar{});
  for (auto p : ring.loop_pucs) states[static_cast<std::size_t>(p.index)] = puc_state::Bar{};
  states[static_cast<std::size_t>(ring.io_coupler.puc.index)] =
      puc_state::TunableCoupler{ring.io_coupler.ratio};
  states[static_cast<std::size_t>(ring.drop_coupler.puc.index)] =
      puc_state::TunableCoupler{ring.drop_coupler.ratio};
  for (const auto& g : ring.guiding_pucs) {
    states[static_cast<std::size_t>(g.puc.index)] =
        g.state == GuideState::Bar ? PucState{puc_state::Bar{}} : PucState{puc_state::Cross{}};
  }
  for (std::size_t i = 0; i < inter.size(); ++i) {
    states[static_cast<std::size_t>(inter[i].index)] = puc_state::Interfering{interfering_phases[i]};
  }
  for (const auto& s : states) validate_state(s);
  return states;
}

}  // namespace xtalk

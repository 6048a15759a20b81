#pragma once

// The initial pass: explicit Euler evolution of the multi-layer field,
// narrow-band front extraction, split detection via connected component
// labeling (union-find), collision detection through shared columns, and the
// topology event log that drives loop extraction and Reeb construction.
//
// The update of a layer couples it only to the base layer: mobility and
// contact strength vanish for all other pairs, and for uniform off-diagonal
// coefficients the cross-layer penalty and gradient terms cancel exactly.
// Updates are therefore evaluated on the one-ring dilation of each row's
// support, which matches the sparsity of the matrix formulation and keeps a
// step proportional to the size of the advancing fronts.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <queue>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "difftopo/isoline.hpp"
#include "difftopo/layer_field.hpp"
#include "difftopo/mesh.hpp"
#include "difftopo/operators.hpp"
#include "difftopo/surface_loop.hpp"

namespace difftopo {

struct DiffusionConfig {
  double dt = 0.0;                    // <= 0 selects the stability bound below
  double band_low_threshold = 0.05;   // tau: lower band limit
  double saturation = 0.999;          // values above count as interior
  double collision_threshold = 0.1;   // kappa: per-layer contribution at contact
  int check_interval = 1;             // steps between front inspections
  long max_steps = 200000;
  double covered_threshold = 0.05;    // snapshot threshold at merge events
  double seed_radius = 0.0;           // <= 0: interface length scale a / sqrt(w)
  bool record_trails = true;
  std::function<void(long step, const LayerField&)> on_check;  // snapshot hook

  void validate() const {
    if (!(band_low_threshold > 0) || !(band_low_threshold < saturation) || !(saturation <= 1.0))
      throw InvalidParameter("need 0 < band threshold < saturation <= 1");
    if (!(collision_threshold > 0) || collision_threshold > 0.5)
      throw InvalidParameter("collision threshold must lie in (0, 0.5]");
    if (check_interval < 1) throw InvalidParameter("check interval must be >= 1");
    if (max_steps < 1) throw InvalidParameter("max steps must be >= 1");
  }
};

// Explicit Euler bound: 0.9 * 2 / lambda_max, with lambda_max the Gershgorin
// row-sum bound of the mass-normalized Laplacian scaled by the largest
// diffusion coefficient a^2 / 2.
inline double stable_time_step(const LaplacianOperator& op, const CoefficientScheme& scheme) {
  double a = scheme.gradient_energy;
  double lambda = op.gershgorin_bound * 0.5 * a * a;
  if (lambda <= 0) throw InvalidParameter("operator admits no positive time step");
  return 0.9 * 2.0 / lambda;
}

struct FrontComponent {
  Index layer = kInvalidIndex;
  std::vector<Index> triangles;          // edge-connected band triangles
  std::vector<Index> boundary_vertices;  // band vertices of those triangles
  double band_length = 0;                // mid-level isoline length inside
};

enum class EventKind { Seed, Split, Merge, Vanish };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Seed: return "seed";
    case EventKind::Split: return "split";
    case EventKind::Merge: return "merge";
    default: return "vanish";
  }
}

// A handle estimate: one involved front's mid-band isoline kept at a merge
// event, together with the data the tunnel pass needs later.
struct HandleEstimate {
  SurfaceLoop loop;
  Index layer = kInvalidIndex;                    // front the loop belongs to
  std::unordered_map<Index, double> field_snapshot;  // that layer's values at the event
  Index event_index = kInvalidIndex;
};

struct TopologyEvent {
  EventKind kind;
  long step = 0;
  std::vector<Index> layers;    // seed/vanish: one; split: parent; merge: inputs
  std::vector<Index> produced;  // split: children; merge: the accumulated layer
  Vec3 position{};              // mean of the involved narrow bands
  std::vector<HandleEstimate> estimates;  // merge only: k-1 kept front loops
  std::vector<Index> covered_snapshot;    // merge only: covered vertices
};

// Lifetime of one layer for Reeb construction.
struct LayerTrack {
  Index layer = kInvalidIndex;
  Index created_event = kInvalidIndex;
  Index consumed_event = kInvalidIndex;
  std::vector<Vec3> trail;  // band anchor per check while active
};

struct InitialPassResult {
  std::vector<TopologyEvent> events;
  std::vector<LayerTrack> tracks;
  LayerField field;
  double dt_used = 0;
  long steps = 0;
  Index seed_vertex = 0;

  long handle_estimate_count() const {
    long n = 0;
    for (const auto& ev : events) n += static_cast<long>(ev.estimates.size());
    return n;
  }
};

// Interface length scale of the coefficient scheme; the diffuse band spans a
// few multiples of this, and meshes must resolve it for fronts to advance.
inline double interface_length_scale(const CoefficientScheme& scheme) {
  return scheme.gradient_energy / std::sqrt(scheme.penalty);
}

// Geodesic ball (Dijkstra over edges) used to initialize the covered region.
// Point seeds below the critical nucleus size collapse instead of growing, so
// runs start from a ball on the order of the interface width.
inline std::vector<Index> seed_region(const TriangleMesh& mesh, Index seed, double radius) {
  std::vector<double> dist(mesh.vertex_count(), 1e300);
  std::priority_queue<std::pair<double, Index>, std::vector<std::pair<double, Index>>,
                      std::greater<>>
      queue;
  dist[seed] = 0;
  queue.push({0, seed});
  std::vector<Index> out;
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    if (d > radius) break;
    out.push_back(v);
    for (Index u : mesh.vertex_neighbors(v)) {
      double nd = d + distance(mesh.position(v), mesh.position(u));
      if (nd < dist[u]) {
        dist[u] = nd;
        queue.push({nd, u});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace diffusion_detail {

struct UnionFind {
  std::vector<Index> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Euler update state shared between the one-shot step and full runs. Keeps
// dense mirrors of the base layer and of the active-layer column sums plus
// the per-layer frontier of recently changed vertices.
class StepContext {
 public:
  StepContext(const LaplacianOperator& op, LayerField& field, const DiffusionConfig& cfg)
      : op_(op), field_(field), cfg_(cfg) {
    cfg_.validate();
    dt_ = cfg.dt > 0 ? cfg.dt : stable_time_step(op, field.coefficients());
    base_dense_.assign(field.vertex_count(), 0.0);
    active_dense_.assign(field.vertex_count(), 0.0);
    for (Index v = 0; v < field.vertex_count(); ++v) resync_vertex(v);
    field_.enable_change_log(true);
  }

  double dt() const { return dt_; }

  // Marks every support vertex of every layer as recently changed, so the
  // next advance() evaluates the full one-ring dilation.
  void prime_full_frontier() {
    changed_.clear();
    for (Index id = 0; id < field_.layer_count(); ++id) {
      const auto& L = field_.layer(id);
      if (L.cleared || (!L.active && id != field_.base_layer())) continue;
      auto& list = changed_[id];
      list.reserve(L.values.size());
      for (const auto& [v, val] : L.values) list.push_back(v);
      std::sort(list.begin(), list.end());
    }
  }

  void prime_vertices(Index layer, std::span<const Index> vertices) {
    auto& list = changed_[layer];
    list.insert(list.end(), vertices.begin(), vertices.end());
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }

  // Re-reads base and active sums at v from the field.
  void resync_vertex(Index v) {
    base_dense_[v] = field_.value(field_.base_layer(), v);
    active_dense_[v] = field_.active_sum(v);
  }

  void resync_layer_support(Index layer) {
    for (const auto& [v, val] : field_.layer(layer).values) resync_vertex(v);
  }

  // Folds mutations made outside advance() (splits, merges, normalization at
  // checks) into the frontier and the dense mirrors.
  void absorb_external_changes() {
    auto log = field_.drain_change_log();
    for (const auto& [layer, v] : log) {
      changed_[layer].push_back(v);
      resync_vertex(v);
    }
    for (auto& [layer, list] : changed_) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }

  // One explicit Euler update of all active layers plus the base layer,
  // followed by clamping and column renormalization.
  void advance() {
    absorb_external_changes();

    const CoefficientScheme& cs = field_.coefficients();
    const Index base = field_.base_layer();
    std::vector<Index> active = field_.active_nonbase_layers();
    const double n = static_cast<double>(active.size() + 1);
    const double mu = cs.mobility, w = cs.penalty, e = cs.contact;
    const double half_a2 = 0.5 * cs.gradient_energy * cs.gradient_energy;
    const double prune = field_.prune_epsilon();

    // Frontier expansion shared by all layers.
    std::vector<Index> moved;
    for (const auto& [layer, list] : changed_) {
      (void)layer;
      moved.insert(moved.end(), list.begin(), list.end());
    }
    std::sort(moved.begin(), moved.end());
    moved.erase(std::unique(moved.begin(), moved.end()), moved.end());
    changed_.clear();
    if (moved.empty()) return;

    std::vector<Index> region;
    region.reserve(moved.size() * 4);
    for (Index v : moved) {
      region.push_back(v);
      for (Index u : neighbors(v)) region.push_back(u);
    }
    std::sort(region.begin(), region.end());
    region.erase(std::unique(region.begin(), region.end()), region.end());

    struct Update {
      Index layer, vertex;
      double value;
    };
    std::vector<Update> updates;

    auto lap_of_layer = [&](Index layer, Index v) {
      double acc = 0;
      auto scols = op_.stiffness.row_columns(v);
      auto svals = op_.stiffness.row_values(v);
      for (std::size_t k = 0; k < scols.size(); ++k)
        acc += svals[k] * field_.value(layer, scols[k]);
      return acc / op_.vertex_mass[v];
    };
    auto lap_of_dense = [&](const std::vector<double>& x, Index v) {
      double acc = 0;
      auto scols = op_.stiffness.row_columns(v);
      auto svals = op_.stiffness.row_values(v);
      for (std::size_t k = 0; k < scols.size(); ++k) acc += svals[k] * x[scols[k]];
      return acc / op_.vertex_mass[v];
    };

    for (Index layer : active) {
      for (Index v : region) {
        double phi = field_.value(layer, v);
        bool near_support = phi > 0;
        if (!near_support)
          for (Index u : neighbors(v))
            if (field_.value(layer, u) > 0) {
              near_support = true;
              break;
            }
        if (!near_support) continue;
        double phi_b = base_dense_[v];
        // New support only grows where the base layer still holds mass;
        // otherwise fronts would bleed diffusively across frozen seams.
        if (phi == 0.0 && phi_b <= prune) continue;

        double lap_i = lap_of_layer(layer, v);
        double lap_b = lap_of_dense(base_dense_, v);
        double rate = -(mu / n) * (w * (phi_b - phi) + half_a2 * (lap_b - lap_i) -
                                   e * std::sqrt(std::max(phi * phi_b, 0.0)));
        if (!std::isfinite(rate)) throw NumericalBlowup("non-finite rate; reduce dt");
        double next = std::clamp(phi + dt_ * rate, 0.0, 1.0);
        if (next != phi) updates.push_back({layer, v, next});
      }
    }

    {
      const double m = static_cast<double>(active.size());
      for (Index v : region) {
        double phi_b = base_dense_[v];
        bool near_support = phi_b > 0;
        if (!near_support)
          for (Index u : neighbors(v))
            if (base_dense_[u] > 0) {
              near_support = true;
              break;
            }
        if (!near_support) continue;

        double total = active_dense_[v];
        double lap_total = lap_of_dense(active_dense_, v);
        double lap_b = lap_of_dense(base_dense_, v);
        double contact = 0;
        for (Index id : field_.owners(v))
          if (id != base && field_.layer(id).active)
            contact += std::sqrt(std::max(phi_b * field_.value(id, v), 0.0));
        // The contact term is a driving force: antisymmetric per pair, so the
        // base loses exactly the mass the covering layers gain.
        double rate = -(mu / n) * (w * total + half_a2 * lap_total + e * contact) +
                      m * (mu / n) * (w * phi_b + half_a2 * lap_b);
        if (!std::isfinite(rate)) throw NumericalBlowup("non-finite rate; reduce dt");
        double next = std::clamp(phi_b + dt_ * rate, 0.0, 1.0);
        if (next != phi_b) updates.push_back({base, v, next});
      }
    }

    std::vector<Index> touched;
    touched.reserve(updates.size());
    for (const auto& u : updates) {
      field_.set_value(u.layer, u.vertex, u.value);
      touched.push_back(u.vertex);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    field_.normalize_columns(touched);

    // Everything the apply + normalization touched feeds the next frontier.
    auto log = field_.drain_change_log();
    for (const auto& [layer, v] : log) {
      changed_[layer].push_back(v);
      resync_vertex(v);
    }
  }

  std::span<const Index> neighbors(Index v) const {
    auto cols = op_.stiffness.row_columns(v);
    return cols;  // includes v itself; harmless for region building
  }

 private:
  const LaplacianOperator& op_;
  LayerField& field_;
  DiffusionConfig cfg_;
  double dt_ = 0;
  std::vector<double> base_dense_, active_dense_;
  std::unordered_map<Index, std::vector<Index>> changed_;
};

}  // namespace diffusion_detail

// One explicit Euler update over the full field (clamped, renormalized).
inline LayerField& step(LayerField& field, const LaplacianOperator& op,
                        const DiffusionConfig& cfg) {
  diffusion_detail::StepContext ctx(op, field, cfg);
  ctx.prime_full_frontier();
  ctx.advance();
  field.enable_change_log(false);
  return field;
}

// Band triangles of a layer partitioned into edge-connected components.
// A triangle is part of the advancing front if at least one of its vertices
// carries a value above the band threshold and below saturation.
inline std::vector<FrontComponent> extract_front(const LayerField& field, Index layer,
                                                 const TriangleMesh& mesh,
                                                 const DiffusionConfig& cfg) {
  const auto& L = field.layer(layer);

  std::vector<Index> band_vertices;
  band_vertices.reserve(L.unsaturated.size());
  for (Index v : L.unsaturated) {
    double val = L.values.at(v);
    if (val > cfg.band_low_threshold && val < cfg.saturation) band_vertices.push_back(v);
  }
  std::sort(band_vertices.begin(), band_vertices.end());
  if (band_vertices.empty()) return {};

  std::vector<Index> tris;
  for (Index v : band_vertices)
    for (Index f : mesh.vertex_faces(v)) tris.push_back(f);
  std::sort(tris.begin(), tris.end());
  tris.erase(std::unique(tris.begin(), tris.end()), tris.end());

  std::unordered_map<Index, Index> tri_slot;
  tri_slot.reserve(tris.size());
  for (Index i = 0; i < tris.size(); ++i) tri_slot.emplace(tris[i], i);

  diffusion_detail::UnionFind uf(tris.size());
  for (Index i = 0; i < tris.size(); ++i)
    for (Index e : mesh.face_edges(tris[i])) {
      Index g = mesh.opposite_face(e, tris[i]);
      auto it = tri_slot.find(g);
      if (it != tri_slot.end()) uf.unite(i, it->second);
    }

  std::unordered_map<Index, Index> root_to_component;
  std::vector<FrontComponent> components;
  for (Index i = 0; i < tris.size(); ++i) {
    Index root = uf.find(i);
    auto [it, inserted] = root_to_component.try_emplace(root, static_cast<Index>(components.size()));
    if (inserted) {
      components.emplace_back();
      components.back().layer = layer;
    }
    components[it->second].triangles.push_back(tris[i]);
  }

  std::unordered_set<Index> band_set(band_vertices.begin(), band_vertices.end());
  auto value_at = [&](Index v) { return field.value(layer, v); };
  for (auto& comp : components) {
    std::vector<Index> verts;
    for (Index f : comp.triangles)
      for (Index v : mesh.face(f))
        if (band_set.count(v)) verts.push_back(v);
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    comp.boundary_vertices = std::move(verts);

    double len = 0;
    for (Index f : comp.triangles) {
      Vec3 pts[3];
      int count = 0;
      const auto& t = mesh.face(f);
      for (int k = 0; k < 3 && count < 3; ++k) {
        Index a = t[k], b = t[(k + 1) % 3];
        double sa = isoline_detail::signed_value(value_at(a), 0.5);
        double sb = isoline_detail::signed_value(value_at(b), 0.5);
        if (sa * sb >= 0) continue;
        pts[count++] = lerp(mesh.position(a), mesh.position(b), sa / (sa - sb));
      }
      if (count == 2) len += distance(pts[0], pts[1]);
    }
    comp.band_length = len;
  }
  return components;
}

// Groups of active non-base layers that each contribute at least kappa at a
// common vertex whose base value has eroded below 1 - kappa; groups close
// transitively.
inline std::vector<std::vector<Index>> detect_collisions(const LayerField& field,
                                                         const DiffusionConfig& cfg) {
  const double kappa = cfg.collision_threshold;
  const Index base = field.base_layer();
  std::vector<Index> active = field.active_nonbase_layers();
  if (active.size() < 2) return {};

  std::unordered_map<Index, Index> layer_slot;
  for (Index i = 0; i < active.size(); ++i) layer_slot.emplace(active[i], i);
  diffusion_detail::UnionFind uf(active.size());
  std::vector<char> in_group(active.size(), 0);

  std::vector<Index> candidates;
  for (Index id : active)
    for (Index v : field.layer(id).unsaturated)
      if (field.value(id, v) >= kappa) candidates.push_back(v);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  for (Index v : candidates) {
    if (field.value(base, v) > 1.0 - kappa) continue;
    Index first_slot = kInvalidIndex;
    for (Index id : field.owners(v)) {
      if (id == base) continue;
      auto it = layer_slot.find(id);
      if (it == layer_slot.end()) continue;
      if (field.value(id, v) < kappa) continue;
      if (first_slot == kInvalidIndex) {
        first_slot = it->second;
      } else {
        uf.unite(first_slot, it->second);
        in_group[first_slot] = in_group[it->second] = 1;
      }
    }
  }

  std::unordered_map<Index, std::vector<Index>> groups;
  for (Index i = 0; i < active.size(); ++i) {
    if (!in_group[i]) continue;
    groups[uf.find(i)].push_back(active[i]);
  }
  std::vector<std::vector<Index>> out;
  for (auto& [root, members] : groups) {
    (void)root;
    if (members.size() >= 2) {
      std::sort(members.begin(), members.end());
      out.push_back(std::move(members));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace diffusion_detail {

class Engine {
 public:
  Engine(const TriangleMesh& mesh, const LaplacianOperator& op, Index seed,
         DiffusionConfig cfg, CoefficientScheme scheme)
      : mesh_(mesh), op_(op), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (seed >= mesh.vertex_count()) throw InvalidParameter("seed vertex out of range");
    result_.seed_vertex = seed;
    double radius = cfg_.seed_radius > 0
                        ? cfg_.seed_radius
                        : 1.5 * interface_length_scale(scheme);
    std::vector<Index> seeds = seed_region(mesh, seed, radius);
    result_.field = init_field(mesh, seeds, scheme);
    ctx_.emplace(op_, result_.field, cfg_);
    result_.dt_used = ctx_->dt();

    TopologyEvent ev;
    ev.kind = EventKind::Seed;
    ev.step = 0;
    ev.layers = {1};
    ev.position = mesh.position(seed);
    push_event(std::move(ev));
    track(1).created_event = 0;

    ctx_->prime_vertices(0, seeds);
    ctx_->prime_vertices(1, seeds);
  }

  InitialPassResult run() {
    long step_index = 0;
    while (true) {
      if (step_index >= cfg_.max_steps)
        throw MaxStepsExceeded("initial pass exceeded " + std::to_string(cfg_.max_steps) +
                               " steps");
      ctx_->advance();
      ++step_index;
      if (step_index % cfg_.check_interval == 0) {
        if (check(step_index)) break;
      }
    }
    result_.steps = step_index;
    result_.field.enable_change_log(false);
    return std::move(result_);
  }

 private:
  LayerTrack& track(Index layer) {
    if (layer >= tracks_.size()) tracks_.resize(layer + 1);
    tracks_[layer].layer = layer;
    return tracks_[layer];
  }

  void push_event(TopologyEvent ev) { result_.events.push_back(std::move(ev)); }

  Vec3 band_mean(std::span<const Index> vertices) const {
    Vec3 c{};
    for (Index v : vertices) c += mesh_.position(v);
    return vertices.empty() ? c : c / static_cast<double>(vertices.size());
  }

  Vec3 snap_to_band(const Vec3& p, std::span<const Index> band) const {
    double best = 1e300;
    Index best_v = kInvalidIndex;
    for (Index v : band) {
      double d = squared_norm(mesh_.position(v) - p);
      if (d < best) {
        best = d;
        best_v = v;
      }
    }
    return best_v == kInvalidIndex ? p : mesh_.position(best_v);
  }

  // The narrow-band isoline of one layer, with components lying on frozen
  // seams (no base mass along them) filtered out; returns the longest
  // advancing-front component.
  bool front_loop_of_layer(Index layer, SurfaceLoop& out) const {
    std::vector<double> row = result_.field.dense_row(layer);
    std::vector<SurfaceLoop> loops = extract_isoline(row, 0.5, mesh_);
    const Index base = result_.field.base_layer();
    double best_len = -1;
    for (auto& loop : loops) {
      double base_mass = 0;
      std::size_t samples = 0;
      for (const auto& p : loop.points) {
        if (p.edge == kInvalidIndex) continue;
        const auto& e = mesh_.edge_vertices(p.edge);
        base_mass += (1.0 - p.edge_t) * result_.field.value(base, e[0]) +
                     p.edge_t * result_.field.value(base, e[1]);
        ++samples;
      }
      if (samples == 0 || base_mass / samples < 0.01) continue;  // frozen seam
      double len = loop.length();
      if (len > best_len) {
        best_len = len;
        out = std::move(loop);
      }
    }
    return best_len > 0;
  }

  std::vector<Index> band_vertices_of(Index layer) const {
    std::vector<Index> band;
    const auto& L = result_.field.layer(layer);
    for (Index v : L.unsaturated) {
      double val = L.values.at(v);
      if (val > cfg_.band_low_threshold && val < cfg_.saturation) band.push_back(v);
    }
    std::sort(band.begin(), band.end());
    return band;
  }

  void handle_split(Index layer, std::vector<FrontComponent> fronts, long step_index) {
    // Expand the band components to a partition of the layer's entire
    // unsaturated support, so the inactive parent retains only saturated
    // values and is never touched again.
    LayerField& field = result_.field;
    const auto& L = field.layer(layer);

    std::unordered_map<Index, Index> label;
    std::vector<Index> queue;
    for (Index c = 0; c < fronts.size(); ++c)
      for (Index v : fronts[c].boundary_vertices)
        if (label.emplace(v, c).second) queue.push_back(v);

    std::size_t head = 0;
    while (head < queue.size()) {
      Index v = queue[head++];
      Index c = label.at(v);
      for (Index u : mesh_.vertex_neighbors(v)) {
        if (!L.unsaturated.count(u)) continue;
        if (label.emplace(u, c).second) queue.push_back(u);
      }
    }

    std::vector<std::vector<Index>> components(fronts.size());
    for (Index v : L.unsaturated) {
      auto it = label.find(v);
      components[it == label.end() ? 0 : it->second].push_back(v);
    }
    for (auto& comp : components) std::sort(comp.begin(), comp.end());
    // A component may have lost all vertices to BFS ties; drop empties.
    std::erase_if(components, [](const auto& c) { return c.empty(); });
    if (components.size() < 2) return;  // not a real branching after expansion

    std::vector<Index> parent_band;
    for (const auto& f : fronts)
      parent_band.insert(parent_band.end(), f.boundary_vertices.begin(),
                         f.boundary_vertices.end());
    std::sort(parent_band.begin(), parent_band.end());
    parent_band.erase(std::unique(parent_band.begin(), parent_band.end()), parent_band.end());

    std::vector<Index> children = field.split_layer(layer, components, step_index);
    ctx_->resync_layer_support(layer);

    TopologyEvent ev;
    ev.kind = EventKind::Split;
    ev.step = step_index;
    ev.layers = {layer};
    ev.produced = children;
    ev.position = band_mean(parent_band);
    Index event_index = static_cast<Index>(result_.events.size());
    push_event(std::move(ev));

    track(layer).consumed_event = event_index;
    for (Index child : children) track(child).created_event = event_index;
  }

  void handle_merge(const std::vector<Index>& group, long step_index) {
    LayerField& field = result_.field;

    struct FrontLoop {
      Index layer;
      SurfaceLoop loop;
      double length;
    };
    std::vector<FrontLoop> loops;
    for (Index id : group) {
      SurfaceLoop loop;
      if (front_loop_of_layer(id, loop)) loops.push_back({id, std::move(loop), 0});
    }
    for (auto& fl : loops) fl.length = fl.loop.length();

    // The longest boundary loop is ignored; ties discard the lowest layer id.
    std::vector<Index> union_band;
    for (Index id : group) {
      auto band = band_vertices_of(id);
      union_band.insert(union_band.end(), band.begin(), band.end());
    }
    std::sort(union_band.begin(), union_band.end());
    union_band.erase(std::unique(union_band.begin(), union_band.end()), union_band.end());

    TopologyEvent ev;
    ev.kind = EventKind::Merge;
    ev.step = step_index;
    ev.layers = group;
    ev.position = band_mean(union_band);
    ev.covered_snapshot = field.covered_set(cfg_.covered_threshold);
    Index event_index = static_cast<Index>(result_.events.size());

    if (!loops.empty()) {
      std::size_t drop = 0;
      for (std::size_t i = 1; i < loops.size(); ++i) {
        if (loops[i].length > loops[drop].length ||
            (loops[i].length == loops[drop].length && loops[i].layer < loops[drop].layer))
          drop = i;
      }
      loops.erase(loops.begin() + static_cast<std::ptrdiff_t>(drop));
      std::sort(loops.begin(), loops.end(), [](const FrontLoop& a, const FrontLoop& b) {
        return a.length != b.length ? a.length < b.length : a.layer < b.layer;
      });
      for (auto& fl : loops) {
        HandleEstimate est;
        est.loop = std::move(fl.loop);
        est.layer = fl.layer;
        est.field_snapshot = field.layer(fl.layer).values;
        est.event_index = event_index;
        ev.estimates.push_back(std::move(est));
      }
    }

    Index merged = field.merge_layers(group, step_index);
    ev.produced = {merged};
    ctx_->resync_layer_support(merged);
    push_event(std::move(ev));

    for (Index id : group) track(id).consumed_event = event_index;
    track(merged).created_event = event_index;
    last_band_position_[merged] = ev.position;
  }

  void handle_vanish(Index layer, long step_index) {
    TopologyEvent ev;
    ev.kind = EventKind::Vanish;
    ev.step = step_index;
    ev.layers = {layer};
    auto it = last_band_position_.find(layer);
    ev.position = it != last_band_position_.end()
                      ? it->second
                      : band_mean(band_support(layer));
    Index event_index = static_cast<Index>(result_.events.size());
    push_event(std::move(ev));
    track(layer).consumed_event = event_index;

    result_.field.mutable_layer(layer).active = false;
    ctx_->resync_layer_support(layer);
  }

  std::vector<Index> band_support(Index layer) const {
    std::vector<Index> verts;
    for (const auto& [v, val] : result_.field.layer(layer).values) verts.push_back(v);
    std::sort(verts.begin(), verts.end());
    return verts;
  }

  bool base_extinct() const {
    const auto& base = result_.field.layer(result_.field.base_layer());
    if (base.values.empty()) return true;
    if (base.values.size() > base.unsaturated.size()) return false;  // saturated mass left
    double mx = 0;
    for (Index v : base.unsaturated) mx = std::max(mx, base.values.at(v));
    return mx < 1.0 - cfg_.saturation;
  }

  // Saturated everywhere it owns values and nothing left to claim next door.
  bool finished(Index layer) const {
    const auto& L = result_.field.layer(layer);
    if (!L.unsaturated.empty()) return false;
    const double prune = result_.field.prune_epsilon();
    const Index base = result_.field.base_layer();
    for (const auto& [v, val] : L.values)
      for (Index u : mesh_.vertex_neighbors(v))
        if (result_.field.value(base, u) > prune) return false;
    return true;
  }

  // Returns true when the run is over.
  bool check(long step_index) {
    LayerField& field = result_.field;

    // Splits first: a front with more than one boundary component moves each
    // component to a fresh layer.
    for (Index layer : field.active_nonbase_layers()) {
      auto fronts = extract_front(field, layer, mesh_, cfg_);
      if (fronts.size() >= 2) handle_split(layer, std::move(fronts), step_index);
    }

    // Collisions after splits, on current layer ids.
    for (const auto& group : detect_collisions(field, cfg_))
      handle_merge(group, step_index);

    // Track band anchors and retire finished layers.
    for (Index layer : field.active_nonbase_layers()) {
      auto band = band_vertices_of(layer);
      if (!band.empty()) {
        Vec3 mean = band_mean(band);
        last_band_position_[layer] = mean;
        if (cfg_.record_trails) track(layer).trail.push_back(snap_to_band(mean, band));
      } else if (finished(layer)) {
        handle_vanish(layer, step_index);
      }
    }

    if (cfg_.on_check) cfg_.on_check(step_index, field);

    if (base_extinct()) {
      for (Index layer : field.active_nonbase_layers()) handle_vanish(layer, step_index);
      result_.tracks = std::move(tracks_);
      return true;
    }
    if (field.active_nonbase_layers().empty()) {
      result_.tracks = std::move(tracks_);
      return true;
    }
    return false;
  }

  const TriangleMesh& mesh_;
  const LaplacianOperator& op_;
  DiffusionConfig cfg_;
  InitialPassResult result_;
  std::optional<StepContext> ctx_;
  std::vector<LayerTrack> tracks_;
  std::unordered_map<Index, Vec3> last_band_position_;
};

}  // namespace diffusion_detail

// Runs the initial pass to completion: seed, evolve, split fronts on
// branching, merge on collision (recording handle estimates and covered
// snapshots), vanish on extinction.
inline InitialPassResult run_initial_pass(const TriangleMesh& mesh, const LaplacianOperator& op,
                                          Index seed_vertex, const DiffusionConfig& cfg,
                                          CoefficientScheme scheme = {}) {
  diffusion_detail::Engine engine(mesh, op, seed_vertex, cfg, scheme);
  return engine.run();
}

}  // namespace difftopo

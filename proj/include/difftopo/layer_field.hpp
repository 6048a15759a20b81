#pragma once

// The dynamic multi-layer field matrix: one sparse row per diffusing region
// plus a distinguished base layer representing still-uncovered surface.
// Rows are stored as hash maps and complemented by a per-vertex owner index,
// which makes column normalization and collision inspection proportional to
// the size of the active narrow bands instead of the whole matrix. Row
// handles are append-only; cleared rows release their storage and are parked
// on a free list. A classic CSR snapshot is available via to_sparse().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "difftopo/errors.hpp"
#include "difftopo/mesh.hpp"
#include "difftopo/sparse.hpp"

namespace difftopo {

// Interaction coefficients of the evolution equation. Pairwise indexed so
// experiments can vary them, but the scheme itself is scalar: the gradient
// energy and penalty act between every distinct pair of layers, while contact
// strength and mobility act only on pairs involving the base layer.
struct CoefficientScheme {
  double gradient_energy = 1.0 / 25.0;  // a, zero on the diagonal
  double penalty = 1.0 / 125.0;         // w = a/5, zero on the diagonal
  double contact = 1.0 / 30.0;          // e, base pairs only
  double mobility = 0.25;               // mu, base pairs only

  double a(Index i, Index j) const { return i == j ? 0.0 : gradient_energy; }
  double w(Index i, Index j) const { return i == j ? 0.0 : penalty; }
  double e(Index i, Index j, Index base) const {
    return (i != j && (i == base || j == base)) ? contact : 0.0;
  }
  double mu(Index i, Index j, Index base) const {
    return (i != j && (i == base || j == base)) ? mobility : 0.0;
  }
};

class LayerField {
 public:
  struct Layer {
    std::unordered_map<Index, double> values;
    std::unordered_set<Index> unsaturated;  // vertices with value in (0,1)
    bool active = false;
    bool cleared = false;
    Index parent = kInvalidIndex;        // primary lineage parent
    std::vector<Index> merge_parents;    // all parents of a merge result
    long created_step = 0;
  };

  LayerField() = default;
  LayerField(Index vertex_count, CoefficientScheme scheme)
      : vertex_count_(vertex_count), scheme_(scheme), owners_(vertex_count) {}

  Index vertex_count() const { return vertex_count_; }
  Index base_layer() const { return 0; }
  Index layer_count() const { return static_cast<Index>(layers_.size()); }
  const CoefficientScheme& coefficients() const { return scheme_; }
  const Layer& layer(Index id) const { return layers_[id]; }

  double prune_epsilon() const { return prune_epsilon_; }
  void set_prune_epsilon(double eps) { prune_epsilon_ = eps; }

  double value(Index layer, Index v) const {
    const auto& m = layers_[layer].values;
    auto it = m.find(v);
    return it == m.end() ? 0.0 : it->second;
  }

  // Sorted ids of layers owning a nonzero at vertex v.
  std::span<const Index> owners(Index v) const { return owners_[v]; }

  double column_sum(Index v) const {
    double s = 0;
    for (Index id : owners_[v]) s += layers_[id].values.at(v);
    return s;
  }

  // Sum over active non-base layers at v.
  double active_sum(Index v) const {
    double s = 0;
    for (Index id : owners_[v])
      if (id != base_layer() && layers_[id].active) s += layers_[id].values.at(v);
    return s;
  }

  std::vector<Index> active_nonbase_layers() const {
    std::vector<Index> ids;
    for (Index id = 1; id < layer_count(); ++id)
      if (layers_[id].active) ids.push_back(id);
    return ids;
  }

  // Writes a value with clamping, pruning and owner/unsaturated bookkeeping.
  void set_value(Index layer, Index v, double val) {
    if (!std::isfinite(val)) throw NumericalBlowup("non-finite field value");
    if (val > 1.0) val = 1.0;
    if (val < prune_epsilon_) val = 0.0;
    Layer& L = layers_[layer];
    auto it = L.values.find(v);
    if (val == 0.0) {
      if (it == L.values.end()) return;
      L.values.erase(it);
      L.unsaturated.erase(v);
      remove_owner(layer, v);
    } else {
      if (it == L.values.end()) {
        L.values.emplace(v, val);
        add_owner(layer, v);
      } else {
        if (it->second == val) return;
        it->second = val;
      }
      if (val < 1.0) L.unsaturated.insert(v);
      else L.unsaturated.erase(v);
    }
    if (track_changes_) change_log_.emplace_back(layer, v);
  }

  void enable_change_log(bool on) { track_changes_ = on; change_log_.clear(); }

  // Sorted, deduplicated (layer, vertex) pairs touched since the last drain.
  std::vector<std::pair<Index, Index>> drain_change_log() {
    std::sort(change_log_.begin(), change_log_.end());
    change_log_.erase(std::unique(change_log_.begin(), change_log_.end()), change_log_.end());
    return std::exchange(change_log_, {});
  }

  void normalize_columns() {
    std::vector<Index> all(vertex_count_);
    for (Index v = 0; v < vertex_count_; ++v) all[v] = v;
    normalize_columns(all);
  }

  // Divides each listed column by its sum, preserving proportions.
  void normalize_columns(std::span<const Index> columns) {
    std::vector<Index> local;
    for (Index v : columns) {
      double s = column_sum(v);
      if (s <= 0.0)
        throw ZeroColumn("total field extinction at vertex " + std::to_string(v));
      if (std::abs(s - 1.0) < 1e-15) continue;
      local.assign(owners_[v].begin(), owners_[v].end());
      for (Index id : local) set_value(id, v, layers_[id].values.at(v) / s);
    }
  }

  std::vector<Index> split_layer(Index layer, const std::vector<std::vector<Index>>& components,
                                 long step = 0) {
    if (layer == base_layer()) throw InvalidSplit("cannot split the base layer");
    if (layer >= layer_count() || layers_[layer].cleared)
      throw InvalidSplit("no such layer");
    if (components.size() < 2) throw InvalidSplit("split needs at least two components");
    {
      std::unordered_set<Index> seen;
      for (const auto& comp : components) {
        if (comp.empty()) throw InvalidSplit("empty split component");
        for (Index v : comp) {
          if (!seen.insert(v).second) throw InvalidSplit("overlapping split components");
          if (layers_[layer].values.find(v) == layers_[layer].values.end())
            throw InvalidSplit("split component vertex outside layer support");
        }
      }
    }
    std::vector<Index> children;
    children.reserve(components.size());
    for (const auto& comp : components) {
      Index child = new_layer(layer, step);
      Layer& C = layers_[child];
      Layer& P = layers_[layer];
      for (Index v : comp) {
        auto it = P.values.find(v);
        double val = it->second;
        P.values.erase(it);
        P.unsaturated.erase(v);
        replace_owner(layer, child, v);
        C.values.emplace(v, val);
        if (val < 1.0) C.unsaturated.insert(v);
        if (track_changes_) {
          change_log_.emplace_back(layer, v);
          change_log_.emplace_back(child, v);
        }
      }
      children.push_back(child);
    }
    layers_[layer].active = false;  // parent has no room left to diffuse
    return children;
  }

  Index merge_layers(const std::vector<Index>& ids, long step = 0) {
    if (ids.size() < 2) throw InvalidMerge("merge needs at least two layers");
    {
      std::unordered_set<Index> seen;
      for (Index id : ids) {
        if (id == base_layer()) throw InvalidMerge("cannot merge the base layer");
        if (id >= layer_count() || layers_[id].cleared || !layers_[id].active)
          throw InvalidMerge("merge of an inactive or cleared layer");
        if (!seen.insert(id).second) throw InvalidMerge("duplicate layer in merge");
      }
    }
    Index result = new_layer(ids.front(), step);
    layers_[result].merge_parents = ids;

    std::unordered_map<Index, double> acc;
    for (Index id : ids) {
      Layer& L = layers_[id];
      for (const auto& [v, val] : L.values) {
        acc[v] += val;
        remove_owner(id, v);
        if (track_changes_) change_log_.emplace_back(id, v);
      }
      L.values.clear();
      L.values.rehash(0);
      L.unsaturated.clear();
      L.active = false;
      L.cleared = true;
      free_rows_.push_back(id);
    }
    Layer& R = layers_[result];
    for (const auto& [v, val] : acc) {
      double clamped = std::min(val, 1.0);
      R.values.emplace(v, clamped);
      add_owner(result, v);
      if (clamped < 1.0) R.unsaturated.insert(v);
      if (track_changes_) change_log_.emplace_back(result, v);
    }
    return result;
  }

  // Vertices the diffusion has claimed: (1 - base value) >= threshold.
  std::vector<Index> covered_set(double threshold) const {
    std::vector<Index> out;
    const auto& base = layers_[base_layer()].values;
    for (Index v = 0; v < vertex_count_; ++v) {
      auto it = base.find(v);
      double b = it == base.end() ? 0.0 : it->second;
      if (1.0 - b >= threshold) out.push_back(v);
    }
    return out;
  }

  SparseMatrix to_sparse() const {
    std::vector<SparseMatrix::Triplet> trips;
    for (Index id = 0; id < layer_count(); ++id)
      for (const auto& [v, val] : layers_[id].values) trips.push_back({id, v, val});
    return SparseMatrix::from_triplets(layer_count(), vertex_count_, std::move(trips));
  }

  std::vector<double> dense_row(Index layer) const {
    std::vector<double> row(vertex_count_, 0.0);
    for (const auto& [v, val] : layers_[layer].values) row[v] = val;
    return row;
  }

  // Highest-contribution layer per vertex (base wins ties only if alone).
  std::vector<Index> dominant_layers() const {
    std::vector<Index> out(vertex_count_, base_layer());
    for (Index v = 0; v < vertex_count_; ++v) {
      double best = -1;
      for (Index id : owners_[v]) {
        double val = layers_[id].values.at(v);
        if (val > best || (val == best && id < out[v])) {
          best = val;
          out[v] = id;
        }
      }
    }
    return out;
  }

  Layer& mutable_layer(Index id) { return layers_[id]; }

  friend LayerField init_field(const TriangleMesh& mesh, const std::vector<Index>& seeds,
                               CoefficientScheme scheme);

 private:
  Index new_layer(Index parent, long step) {
    Index id = static_cast<Index>(layers_.size());
    layers_.emplace_back();
    layers_.back().active = true;
    layers_.back().parent = parent;
    layers_.back().created_step = step;
    return id;
  }

  void add_owner(Index layer, Index v) {
    auto& o = owners_[v];
    o.insert(std::lower_bound(o.begin(), o.end(), layer), layer);
  }
  void remove_owner(Index layer, Index v) {
    auto& o = owners_[v];
    auto it = std::lower_bound(o.begin(), o.end(), layer);
    if (it != o.end() && *it == layer) o.erase(it);
  }
  void replace_owner(Index from, Index to, Index v) {
    remove_owner(from, v);
    add_owner(to, v);
  }

  Index vertex_count_ = 0;
  CoefficientScheme scheme_;
  std::vector<Layer> layers_;
  std::vector<std::vector<Index>> owners_;
  std::vector<Index> free_rows_;
  std::vector<std::pair<Index, Index>> change_log_;
  bool track_changes_ = false;
  double prune_epsilon_ = 1e-9;
};

// Two layers: base = 1 everywhere except the seeds, seed layer = 1 on them.
inline LayerField init_field(const TriangleMesh& mesh, const std::vector<Index>& seeds,
                             CoefficientScheme scheme = {}) {
  if (seeds.empty()) throw EmptySeed("seed set is empty");
  for (Index v : seeds)
    if (v >= mesh.vertex_count()) throw InvalidParameter("seed vertex out of range");

  LayerField field(mesh.vertex_count(), scheme);
  field.new_layer(kInvalidIndex, 0);  // base layer, id 0
  field.new_layer(kInvalidIndex, 0);  // seed layer, id 1
  field.layers_[0].active = true;

  std::unordered_set<Index> seed_set(seeds.begin(), seeds.end());
  LayerField::Layer& base = field.layers_[0];
  LayerField::Layer& seed = field.layers_[1];
  for (Index v = 0; v < mesh.vertex_count(); ++v) {
    if (seed_set.count(v)) {
      seed.values.emplace(v, 1.0);
      field.add_owner(1, v);
    } else {
      base.values.emplace(v, 1.0);
      field.add_owner(0, v);
    }
  }
  return field;
}

inline LayerField& normalize_columns(LayerField& field) {
  field.normalize_columns();
  return field;
}

}  // namespace difftopo

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_ENTITY_DOF_STORE_HPP
#define HPDIST_ENTITY_DOF_STORE_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "hpdist/cell_key.hpp"
#include "hpdist/element.hpp"
#include "hpdist/forest.hpp"

namespace hpdist {

using DofIndex = std::uint64_t;

/// Reserved invalid index value used while enumeration is in progress; the
/// maximum representable index can never collide with a real one.
inline constexpr DofIndex kInvalidDof = ~DofIndex{0};

/// Per-entity storage of DoF index arrays, keyed by active FE index. Two
/// cells using the same element on a shared entity share one array, so
/// setting indices from one cell makes them visible from the other without
/// copying.
///
/// Built in one bulk pass from per-cell specs. Entities are sorted along
/// the space-filling curve and all index arrays live in one contiguous
/// pool, so Morton-order traversals walk memory almost sequentially.
class EntityDofStore {
  template <class Store, class Span>
  class BasicArraysRef {
   public:
    int size() const {
      return int(store_->entry_begin_[entity_ + 1] - store_->entry_begin_[entity_]);
    }
    int fe(int i) const { return store_->entry_fe_[store_->entry_begin_[entity_] + i]; }
    Span dofs(int i) const {
      const std::size_t e = store_->entry_begin_[entity_] + i;
      return {store_->pool_.data() + store_->entry_dofs_[e], store_->entry_len_[e]};
    }
    int index_of(int fe) const {
      for (int i = 0; i < size(); ++i)
        if (this->fe(i) == fe) return i;
      return -1;
    }

   private:
    friend class EntityDofStore;
    BasicArraysRef(Store* store, std::size_t entity) : store_(store), entity_(entity) {}
    Store* store_;
    std::size_t entity_;
  };

 public:
  struct VertexSpec {
    VertexKey key;
    int fe;
  };
  struct EdgeSpec {
    EdgeKey key;
    int fe;
    int len;
  };
  struct InteriorSpec {
    CellKey key;
    int fe;
    std::uint32_t len;
  };

  /// The index arrays of one entity: one per adjacent element.
  using ArraysRef = BasicArraysRef<EntityDofStore, std::span<DofIndex>>;
  using ConstArraysRef = BasicArraysRef<const EntityDofStore, std::span<const DofIndex>>;

  EntityDofStore() = default;

  /// Builds the store; duplicate (key, fe) specs collapse onto one array.
  /// Interior specs must be unique and sorted. When requested, the entity
  /// position of every input spec is reported back, saving the caller the
  /// later lookups.
  EntityDofStore(const std::vector<VertexSpec>& vertices, const std::vector<EdgeSpec>& edges,
                 const std::vector<InteriorSpec>& interiors,
                 std::vector<std::uint32_t>* vertex_entity_of_spec = nullptr,
                 std::vector<std::uint32_t>* edge_entity_of_spec = nullptr);

  std::size_t n_vertices() const { return n_vertices_; }
  std::size_t n_edges() const { return n_edges_; }
  std::size_t n_interiors() const { return interior_keys_.size(); }

  /// Position of an entity in the curve order; throws if absent.
  std::size_t vertex_index(const VertexKey& key) const;
  std::size_t edge_index(const EdgeKey& key) const;
  std::size_t interior_index(const CellKey& key) const;

  ArraysRef vertex_arrays(std::size_t i) { return {this, i}; }
  ConstArraysRef vertex_arrays(std::size_t i) const { return {this, i}; }
  ArraysRef edge_arrays(std::size_t i) { return {this, n_vertices_ + i}; }
  ConstArraysRef edge_arrays(std::size_t i) const { return {this, n_vertices_ + i}; }

  std::span<DofIndex> interior_slots_at(std::size_t i) {
    return {pool_.data() + interior_dofs_[i], interior_dofs_[i + 1] - interior_dofs_[i]};
  }
  std::span<const DofIndex> interior_slots_at(std::size_t i) const {
    return {pool_.data() + interior_dofs_[i], interior_dofs_[i + 1] - interior_dofs_[i]};
  }
  int interior_fe(std::size_t i) const { return interior_fe_[i]; }

  std::span<DofIndex> vertex_slots(const VertexKey& key, int fe) {
    return fe_slots(vertex_arrays(vertex_index(key)), fe);
  }
  std::span<const DofIndex> vertex_slots(const VertexKey& key, int fe) const {
    return fe_slots(vertex_arrays(vertex_index(key)), fe);
  }
  std::span<DofIndex> edge_slots(const EdgeKey& key, int fe) {
    return fe_slots(edge_arrays(edge_index(key)), fe);
  }
  std::span<const DofIndex> edge_slots(const EdgeKey& key, int fe) const {
    return fe_slots(edge_arrays(edge_index(key)), fe);
  }
  std::span<DofIndex> interior_slots(const CellKey& key, int fe) {
    const std::size_t i = interior_index(key);
    if (interior_fe_[i] != fe)
      throw std::out_of_range("no DoF array for this entity and element");
    return interior_slots_at(i);
  }
  std::span<const DofIndex> interior_slots(const CellKey& key, int fe) const {
    const std::size_t i = interior_index(key);
    if (interior_fe_[i] != fe)
      throw std::out_of_range("no DoF array for this entity and element");
    return interior_slots_at(i);
  }

  /// Visits every index array in deterministic (curve) order.
  template <class F>
  void for_each_array(F&& f) {
    std::size_t e = 0;
    for (std::size_t entity = 0; entity < n_vertices_ + n_edges_; ++entity)
      for (; e < entry_begin_[entity + 1]; ++e)
        f(std::span<DofIndex>(pool_.data() + entry_dofs_[e], entry_len_[e]));
    for (std::size_t i = 0; i < n_interiors(); ++i) f(interior_slots_at(i));
  }
  template <class F>
  void for_each_array(F&& f) const {
    std::size_t e = 0;
    for (std::size_t entity = 0; entity < n_vertices_ + n_edges_; ++entity)
      for (; e < entry_begin_[entity + 1]; ++e)
        f(std::span<const DofIndex>(pool_.data() + entry_dofs_[e], entry_len_[e]));
    for (std::size_t i = 0; i < n_interiors(); ++i) f(interior_slots_at(i));
  }

  template <class F>
  void for_each_vertex(F&& f) {
    for (std::size_t i = 0; i < n_vertices_; ++i) f(vertex_keys_[i], vertex_arrays(i));
  }
  template <class F>
  void for_each_edge(F&& f) {
    for (std::size_t i = 0; i < n_edges_; ++i) f(edge_keys_[i], edge_arrays(i));
  }
  template <class F>
  void for_each_vertex(F&& f) const {
    for (std::size_t i = 0; i < n_vertices_; ++i) f(vertex_keys_[i], vertex_arrays(i));
  }
  template <class F>
  void for_each_edge(F&& f) const {
    for (std::size_t i = 0; i < n_edges_; ++i) f(edge_keys_[i], edge_arrays(i));
  }

 private:
  static std::span<DofIndex> fe_slots(ArraysRef arrays, int fe) {
    const int i = arrays.index_of(fe);
    if (i < 0) throw std::out_of_range("no DoF array for this entity and element");
    return arrays.dofs(i);
  }
  static std::span<const DofIndex> fe_slots(ConstArraysRef arrays, int fe) {
    const int i = arrays.index_of(fe);
    if (i < 0) throw std::out_of_range("no DoF array for this entity and element");
    return arrays.dofs(i);
  }

  std::size_t n_vertices_ = 0;
  std::size_t n_edges_ = 0;
  std::vector<std::uint64_t> vertex_codes_;  // sorted curve codes
  std::vector<VertexKey> vertex_keys_;
  std::vector<std::uint64_t> edge_codes_;  // sorted origin codes, ties on keys
  std::vector<EdgeKey> edge_keys_;

  // entity -> run of entries; entry -> (element, slice of the pool);
  // vertices and edges share one entity sequence, vertices first
  std::vector<std::uint32_t> entry_begin_;  // size n_vertices_+n_edges_+1
  std::vector<std::int8_t> entry_fe_;
  std::vector<std::uint8_t> entry_len_;
  std::vector<std::uint32_t> entry_dofs_;

  std::vector<CellKey> interior_keys_;  // sorted (Morton)
  std::vector<int> interior_fe_;
  std::vector<std::uint32_t> interior_dofs_;  // size n_interiors()+1

  std::vector<DofIndex> pool_;
};

/// The cell's DoF indices in the canonical order used throughout: the four
/// vertices, then the four edges (left, right, bottom, top, each in its
/// canonical direction), then the interior block.
std::vector<DofIndex> collect_cell_dofs(const EntityDofStore& store, const Forest& forest,
                                        const CellKey& cell, int fe);

}  // namespace hpdist

#endif

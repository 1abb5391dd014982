// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/entity_dof_store.hpp"

#include <algorithm>
#include <bit>

namespace hpdist {

namespace {

// Sort records are 16-byte (code, tag) pairs so comparisons never touch the
// spec arrays. The tag packs the remaining entity identity, the element,
// and the spec's position: edges store log2 of their power-of-two extent.
using SpecRecord = std::pair<std::uint64_t, std::uint64_t>;

std::uint64_t vertex_tag(int fe, std::uint32_t source) {
  return (std::uint64_t(fe) << 32) | source;
}

std::uint64_t edge_tag(const EdgeKey& key, int fe, std::uint32_t source) {
  const unsigned log2_extent = std::countr_zero(key.extent);
  return (std::uint64_t(key.axis) << 41) | (std::uint64_t(log2_extent) << 36) |
         (std::uint64_t(fe) << 32) | source;
}

}  // namespace

EntityDofStore::EntityDofStore(const std::vector<VertexSpec>& vertices,
                               const std::vector<EdgeSpec>& edges,
                               const std::vector<InteriorSpec>& interiors,
                               std::vector<std::uint32_t>* vertex_entity_of_spec,
                               std::vector<std::uint32_t>* edge_entity_of_spec) {
  std::vector<SpecRecord> records;
  std::uint32_t pool_size = 0;

  // Vertices: one slot per element; the code alone identifies the entity.
  records.resize(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i)
    records[i] = {morton_interleave(vertices[i].key.x, vertices[i].key.y),
                  vertex_tag(vertices[i].fe, static_cast<std::uint32_t>(i))};
  std::sort(records.begin(), records.end());
  if (vertex_entity_of_spec) vertex_entity_of_spec->resize(vertices.size());
  entry_begin_.push_back(0);
  for (std::size_t i = 0; i < records.size();) {
    const std::uint64_t code = records[i].first;
    vertex_codes_.push_back(code);
    vertex_keys_.push_back(VertexKey{morton_compact(code), morton_compact(code >> 1)});
    const std::uint32_t entity = static_cast<std::uint32_t>(vertex_codes_.size() - 1);
    int last_fe = -1;
    for (; i < records.size() && records[i].first == code; ++i) {
      const int fe = static_cast<int>(records[i].second >> 32);
      if (vertex_entity_of_spec)
        (*vertex_entity_of_spec)[records[i].second & 0xffffffffu] = entity;
      if (fe == last_fe) continue;
      last_fe = fe;
      entry_fe_.push_back(static_cast<std::int8_t>(fe));
      entry_len_.push_back(1);
      entry_dofs_.push_back(pool_size);
      pool_size += 1;
    }
    entry_begin_.push_back(static_cast<std::uint32_t>(entry_fe_.size()));
  }
  n_vertices_ = vertex_keys_.size();

  // Edges: the entity is (code, axis, extent); elements order within it.
  std::array<std::uint8_t, 16> len_of_fe{};
  records.resize(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    records[i] = {morton_interleave(edges[i].key.x, edges[i].key.y),
                  edge_tag(edges[i].key, edges[i].fe, static_cast<std::uint32_t>(i))};
    len_of_fe[edges[i].fe & 0xf] = static_cast<std::uint8_t>(edges[i].len);
  }
  std::sort(records.begin(), records.end());
  if (edge_entity_of_spec) edge_entity_of_spec->resize(edges.size());
  for (std::size_t i = 0; i < records.size();) {
    const std::uint64_t code = records[i].first;
    const std::uint64_t entity_tag = records[i].second >> 36;
    edge_codes_.push_back(code);
    edge_keys_.push_back(EdgeKey{morton_compact(code), morton_compact(code >> 1),
                                 static_cast<std::uint8_t>(entity_tag >> 5),
                                 1u << (entity_tag & 0x1f)});
    const std::uint32_t entity = static_cast<std::uint32_t>(edge_codes_.size() - 1);
    int last_fe = -1;
    for (; i < records.size() && records[i].first == code &&
           (records[i].second >> 36) == entity_tag;
         ++i) {
      const int fe = static_cast<int>((records[i].second >> 32) & 0xf);
      if (edge_entity_of_spec)
        (*edge_entity_of_spec)[records[i].second & 0xffffffffu] = entity;
      if (fe == last_fe) continue;
      last_fe = fe;
      entry_fe_.push_back(static_cast<std::int8_t>(fe));
      entry_len_.push_back(len_of_fe[fe]);
      entry_dofs_.push_back(pool_size);
      pool_size += len_of_fe[fe];
    }
    entry_begin_.push_back(static_cast<std::uint32_t>(entry_fe_.size()));
  }
  n_edges_ = edge_keys_.size();

  // Interiors: already unique and sorted; their arrays extend the pool.
  interior_keys_.reserve(interiors.size());
  interior_fe_.reserve(interiors.size());
  interior_dofs_.reserve(interiors.size() + 1);
  interior_dofs_.push_back(pool_size);
  for (std::size_t i = 0; i < interiors.size(); ++i) {
    if (i > 0 && !(interior_keys_.back() < interiors[i].key))
      throw std::invalid_argument("interior specs must be sorted and unique");
    interior_keys_.push_back(interiors[i].key);
    interior_fe_.push_back(interiors[i].fe);
    pool_size += interiors[i].len;
    interior_dofs_.push_back(pool_size);
  }

  pool_.assign(pool_size, kInvalidDof);
}

std::size_t EntityDofStore::vertex_index(const VertexKey& key) const {
  const std::uint64_t code = morton_interleave(key.x, key.y);
  const auto it = std::lower_bound(vertex_codes_.begin(), vertex_codes_.end(), code);
  if (it == vertex_codes_.end() || *it != code) throw std::out_of_range("unknown vertex entity");
  return static_cast<std::size_t>(it - vertex_codes_.begin());
}

std::size_t EntityDofStore::edge_index(const EdgeKey& key) const {
  const std::uint64_t code = morton_interleave(key.x, key.y);
  auto it = std::lower_bound(edge_codes_.begin(), edge_codes_.end(), code);
  for (; it != edge_codes_.end() && *it == code; ++it) {
    const std::size_t i = static_cast<std::size_t>(it - edge_codes_.begin());
    if (edge_keys_[i] == key) return i;
  }
  throw std::out_of_range("unknown edge entity");
}

std::size_t EntityDofStore::interior_index(const CellKey& key) const {
  const auto it = std::lower_bound(interior_keys_.begin(), interior_keys_.end(), key);
  if (it == interior_keys_.end() || !(*it == key))
    throw std::out_of_range("unknown cell interior");
  return static_cast<std::size_t>(it - interior_keys_.begin());
}

std::vector<DofIndex> collect_cell_dofs(const EntityDofStore& store, const Forest& forest,
                                        const CellKey& cell, int fe) {
  std::vector<DofIndex> dofs;
  const CellEntities ents = forest.entities_of(cell);
  for (const VertexKey& v : ents.vertices) dofs.push_back(store.vertex_slots(v, fe)[0]);
  for (const EdgeKey& e : ents.edges) {
    const auto slots = store.edge_slots(e, fe);
    dofs.insert(dofs.end(), slots.begin(), slots.end());
  }
  const auto interior = store.interior_slots(cell, fe);
  dofs.insert(dofs.end(), interior.begin(), interior.end());
  return dofs;
}

}  // namespace hpdist

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/dof_enumerator.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

namespace hpdist {

int NumberCache::owner_of_index(DofIndex index) const {
  if (index == kInvalidDof || index >= n_global)
    throw std::invalid_argument("not a valid DoF index");
  DofIndex begin = 0;
  for (std::size_t p = 0; p < n_per_rank.size(); ++p) {
    const DofIndex end = begin + n_per_rank[p];
    if (index >= begin && index < end) return static_cast<int>(p);
    begin = end;
  }
  throw std::logic_error("index outside all owned ranges");
}

ActiveFeMap exchange_active_fe_indices(const LocalView& view, const ActiveFeMap& owned_values,
                                       Fabric& fabric) {
  ActiveFeMap result;
  std::map<int, ByteBuffer> outgoing;
  for (const int q : view.neighbor_ranks()) outgoing[q];  // symmetric pattern

  const auto& owned = view.owned();
  for (std::size_t j = 0; j < owned.size(); ++j) {
    const auto it = owned_values.find(owned[j]);
    if (it == owned_values.end())
      throw std::runtime_error("active FE index missing on an owned cell");
    result.emplace(owned[j], it->second);
    for (const int q : view.ghost_targets(j)) {
      ByteBuffer& buf = outgoing[q];
      append_cell_key(buf, owned[j]);
      append_u32(buf, static_cast<std::uint32_t>(it->second));
    }
  }

  const auto ex = fabric.neighbor_exchange(view.rank(), std::move(outgoing), "active-fe");
  for (const auto& [sender, bytes] : ex.received) {
    ByteReader reader(bytes);
    while (!reader.done()) {
      const CellKey cell = read_cell_key(reader);
      const int fe = static_cast<int>(reader.read_u32());
      if (!view.is_relevant(cell) || view.is_owned(cell))
        throw std::runtime_error("stray ghost data");
      result[cell] = fe;
    }
  }
  for (const CellKey& g : view.ghosts())
    if (!result.count(g)) throw std::runtime_error("ghost cell without active FE index");
  return result;
}

namespace {

// Per (entity, element) facts folded while allocating: the smallest rank of
// any adjacent relevant cell using that element, and whether one of them is
// locally owned.
struct FeMeta {
  std::int8_t fe = -1;
  std::int8_t degree = 0;
  bool owned_adjacent = false;
  int min_rank = std::numeric_limits<int>::max();
};

struct FeMetaSet {
  static constexpr int kMaxElements = 4;  // a vertex joins at most four cells
  std::uint8_t count = 0;
  std::array<FeMeta, kMaxElements> entries;

  void note(int fe, int degree, int rank, bool owned) {
    for (int i = 0; i < count; ++i) {
      if (entries[i].fe == fe) {
        entries[i].min_rank = std::min(entries[i].min_rank, rank);
        entries[i].owned_adjacent |= owned;
        return;
      }
    }
    entries[count++] = FeMeta{static_cast<std::int8_t>(fe), static_cast<std::int8_t>(degree),
                              owned, rank};
  }
};

// Entity positions of one relevant cell within the store, resolved once so
// the stage loops run on plain indices.
struct CellRecord {
  int fe = -1;
  bool owned = false;
  std::array<std::uint32_t, 4> vertex{};
  std::array<std::uint32_t, 4> edge{};
  std::uint32_t interior = 0;  // equals the cell's position in the relevant sequence
};

}  // namespace

EnumerationResult distribute_dofs(const LocalView& view, const ActiveFeMap& active_fe,
                                  const ElementCollection& collection, Fabric& fabric) {
  const Forest& forest = view.forest();
  const int rank = view.rank();
  EnumerationResult result;

  const auto fe_of = [&](const CellKey& cell) {
    const auto it = active_fe.find(cell);
    if (it == active_fe.end())
      throw std::runtime_error("active FE index missing on a relevant cell");
    return it->second;
  };

  // Stage 0: allocate one index array per (entity, adjacent element), all
  // set to the invalid value. The specs of all relevant cells are collected
  // first and collapsed in one bulk build, which reports back each cell's
  // entity positions.
  const std::vector<CellKey> relevant = view.relevant();
  std::vector<std::uint32_t> vertex_entity_of_spec;
  std::vector<std::uint32_t> edge_entity_of_spec;
  {
    std::vector<EntityDofStore::VertexSpec> vertex_specs;
    std::vector<EntityDofStore::EdgeSpec> edge_specs;
    std::vector<EntityDofStore::InteriorSpec> interior_specs;
    vertex_specs.reserve(4 * relevant.size());
    edge_specs.reserve(4 * relevant.size());
    interior_specs.reserve(relevant.size());
    for (const CellKey& cell : relevant) {
      const int fe = fe_of(cell);
      const LagrangeElement& element = collection[fe];
      const CellEntities ents = forest.entities_of(cell);
      for (const VertexKey& v : ents.vertices) vertex_specs.push_back({v, fe});
      for (const EdgeKey& e : ents.edges)
        edge_specs.push_back({e, fe, element.dofs_per_edge()});
      interior_specs.push_back(
          {cell, fe, static_cast<std::uint32_t>(element.dofs_per_interior())});
    }
    result.store = EntityDofStore(vertex_specs, edge_specs, interior_specs,
                                  &vertex_entity_of_spec, &edge_entity_of_spec);
  }
  EntityDofStore& store = result.store;

  // Per-cell entity positions, folding the incidence facts (smallest
  // adjacent rank and owned-adjacency per element) along the way. Spec order
  // was cell-major, four entities apiece.
  std::vector<CellRecord> records(relevant.size());
  std::vector<FeMetaSet> vertex_meta(store.n_vertices());
  std::vector<FeMetaSet> edge_meta(store.n_edges());
  for (std::size_t i = 0; i < relevant.size(); ++i) {
    const CellKey& cell = relevant[i];
    CellRecord& rec = records[i];
    rec.fe = fe_of(cell);
    const int owner = view.owner_of(cell);
    rec.owned = owner == rank;
    rec.interior = static_cast<std::uint32_t>(i);
    const int degree = collection[rec.fe].degree();
    for (int k = 0; k < 4; ++k) {
      rec.vertex[k] = vertex_entity_of_spec[4 * i + k];
      rec.edge[k] = edge_entity_of_spec[4 * i + k];
      vertex_meta[rec.vertex[k]].note(rec.fe, degree, owner, rec.owned);
      edge_meta[rec.edge[k]].note(rec.fe, degree, owner, rec.owned);
    }
  }

  const auto for_cell_slots = [&](const CellRecord& rec, auto&& f) {
    for (int k = 0; k < 4; ++k) {
      const auto arrays = store.vertex_arrays(rec.vertex[k]);
      f(arrays.dofs(arrays.index_of(rec.fe))[0]);
    }
    for (int k = 0; k < 4; ++k) {
      const auto arrays = store.edge_arrays(rec.edge[k]);
      for (DofIndex& d : arrays.dofs(arrays.index_of(rec.fe))) f(d);
    }
    for (DofIndex& d : store.interior_slots_at(rec.interior)) f(d);
  };
  const auto collect_record_dofs = [&](const CellRecord& rec) {
    std::vector<DofIndex> dofs;
    dofs.reserve(collection[rec.fe].dofs_per_cell());
    for_cell_slots(rec, [&](DofIndex& d) { dofs.push_back(d); });
    return dofs;
  };

  // Stage 1: enumerate everything reachable from owned cells, ascending from
  // zero in Morton order, skipping slots already set from a previous cell.
  DofIndex next_local = 0;
  for (const CellRecord& rec : records) {
    if (!rec.owned) continue;
    for_cell_slots(rec, [&](DofIndex& slot) {
      if (slot == kInvalidDof) slot = next_local++;
    });
  }

  // Stage 2: tie-break. Where an entity is shared with a cell of the same
  // element owned by a smaller rank, that rank owns the indices; drop ours.
  const auto tie_break = [&](const FeMetaSet& metas, EntityDofStore::ArraysRef arrays) {
    for (int i = 0; i < metas.count; ++i) {
      const FeMeta& m = metas.entries[i];
      if (!m.owned_adjacent || m.min_rank >= rank) continue;
      for (DofIndex& d : arrays.dofs(arrays.index_of(m.fe))) d = kInvalidDof;
    }
  };
  for (std::size_t i = 0; i < store.n_vertices(); ++i)
    tie_break(vertex_meta[i], store.vertex_arrays(i));
  for (std::size_t i = 0; i < store.n_edges(); ++i) tie_break(edge_meta[i], store.edge_arrays(i));

  // Stage 3: unification. On every shared entity the element of lowest
  // degree keeps the coincident DoFs. Arrays of other elements reachable
  // from owned cells take over the dominating index; if the dominating
  // element lives only on ghost cells, the ghost side wins and our copies
  // become invalid until the exchange fills them.
  for (std::size_t i = 0; i < store.n_vertices(); ++i) {
    const FeMetaSet& metas = vertex_meta[i];
    if (metas.count < 2) continue;
    const FeMeta* dom = &metas.entries[0];
    for (int k = 1; k < metas.count; ++k)
      if (metas.entries[k].degree < dom->degree) dom = &metas.entries[k];
    const auto arrays = store.vertex_arrays(i);
    const DofIndex src = arrays.dofs(arrays.index_of(dom->fe))[0];
    for (int k = 0; k < metas.count; ++k) {
      const FeMeta& m = metas.entries[k];
      if (m.fe == dom->fe || !m.owned_adjacent) continue;
      arrays.dofs(arrays.index_of(m.fe))[0] = dom->owned_adjacent ? src : kInvalidDof;
    }
  }
  for (std::size_t i = 0; i < store.n_edges(); ++i) {
    const FeMetaSet& metas = edge_meta[i];
    if (metas.count < 2) continue;
    const FeMeta* dom = &metas.entries[0];
    for (int k = 1; k < metas.count; ++k)
      if (metas.entries[k].degree < dom->degree) dom = &metas.entries[k];
    const auto arrays = store.edge_arrays(i);
    const auto src = arrays.dofs(arrays.index_of(dom->fe));
    for (int k = 0; k < metas.count; ++k) {
      const FeMeta& m = metas.entries[k];
      if (m.fe == dom->fe || !m.owned_adjacent) continue;
      const auto dst = arrays.dofs(arrays.index_of(m.fe));
      for (const auto& [a, b] : collection.unification_pairs(dom->fe, m.fe))
        dst[b - 1] = dom->owned_adjacent ? src[a - 1] : kInvalidDof;
    }
  }

  // Stage 4: compact the surviving indices in ascending order, count them,
  // and shift by the exclusive scan over the per-rank counts. Stage-1 values
  // are dense below next_local, so a flat remap table suffices.
  constexpr std::uint32_t kUnseen = ~std::uint32_t{0};
  if (next_local >= kUnseen) throw std::runtime_error("local index space exhausted");
  std::vector<std::uint32_t> remap(next_local, kUnseen);
  store.for_each_array([&](std::span<DofIndex> arr) {
    for (const DofIndex d : arr)
      if (d != kInvalidDof) remap[d] = 0;
  });
  DofIndex n_local = 0;
  for (DofIndex v = 0; v < next_local; ++v)
    if (remap[v] != kUnseen) remap[v] = static_cast<std::uint32_t>(n_local++);
  const DofIndex offset = fabric.exscan_sum(rank, n_local);
  store.for_each_array([&](std::span<DofIndex> arr) {
    for (DofIndex& d : arr)
      if (d != kInvalidDof) d = offset + remap[d];
  });

  NumberCache& cache = result.cache;
  cache.rank = rank;
  cache.owned_begin = offset;
  cache.owned_end = offset + n_local;
  {
    ByteBuffer mine;
    append_u64(mine, n_local);
    const auto gathered = fabric.all_gather(rank, std::move(mine), "dof-counts");
    cache.n_per_rank.reserve(gathered.size());
    for (const ByteBuffer& buf : gathered) {
      ByteReader reader(buf);
      cache.n_per_rank.push_back(reader.read_u64());
      cache.n_global += cache.n_per_rank.back();
    }
  }

  // Receiving side of stages 5 and 7: indices may only be introduced or
  // confirmed, never degraded back to invalid.
  const auto apply_received = [&](const std::map<int, ByteBuffer>& received) {
    for (const auto& [sender, bytes] : received) {
      ByteReader reader(bytes);
      while (!reader.done()) {
        const CellKey cell = read_cell_key(reader);
        std::size_t index;
        try {
          index = store.interior_index(cell);
        } catch (const std::out_of_range&) {
          throw std::runtime_error("stray ghost data");
        }
        const CellRecord& rec = records[index];
        if (rec.owned) throw std::runtime_error("stray ghost data");
        const std::uint32_t count = reader.read_u32();
        std::vector<DofIndex> incoming(count);
        for (std::uint32_t i = 0; i < count; ++i) incoming[i] = reader.read_u64();
        std::size_t pos = 0;
        for_cell_slots(rec, [&](DofIndex& slot) {
          if (pos >= incoming.size()) throw std::runtime_error("short ghost payload");
          const DofIndex recv = incoming[pos++];
          if (recv == kInvalidDof) return;
          if (slot == kInvalidDof)
            slot = recv;
          else if (slot != recv)
            throw std::runtime_error("conflicting ghost data");
        });
        if (pos != incoming.size()) throw std::runtime_error("oversized ghost payload");
      }
    }
  };

  const auto encode_cell = [&](const CellKey& cell, const std::vector<DofIndex>& dofs,
                               ByteBuffer& buf) {
    append_cell_key(buf, cell);
    append_u32(buf, static_cast<std::uint32_t>(dofs.size()));
    for (const DofIndex d : dofs) append_u64(buf, d);
  };

  // Stage 5: send, for every owned cell which is a ghost elsewhere, its
  // global identifier and full index list to those ranks. Cells whose list
  // still carries invalid entries are remembered for stage 7.
  std::vector<bool> resend(relevant.size(), false);
  {
    std::map<int, ByteBuffer> outgoing;
    for (const int q : view.neighbor_ranks()) outgoing[q];
    std::size_t owned_position = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!records[i].owned) continue;
      const std::size_t j = owned_position++;
      const auto& targets = view.ghost_targets(j);
      if (targets.empty()) continue;
      const auto dofs = collect_record_dofs(records[i]);
      resend[i] = std::any_of(dofs.begin(), dofs.end(),
                              [](DofIndex d) { return d == kInvalidDof; });
      ByteBuffer encoded;
      encode_cell(relevant[i], dofs, encoded);
      for (const int q : targets)
        outgoing[q].insert(outgoing[q].end(), encoded.begin(), encoded.end());
    }
    const auto ex = fabric.neighbor_exchange(rank, std::move(outgoing), "ghost-exchange-1");
    result.stats.first_exchange_bytes = ex.bytes_sent;
    apply_received(ex.received);
  }

  // Stage 6: merge on interfaces. Coincident slots on one entity form one
  // DoF; wherever one of them is known and another still invalid, copy the
  // known index over.
  store.for_each_vertex([&](const VertexKey&, EntityDofStore::ArraysRef arrays) {
    if (arrays.size() < 2) return;
    DofIndex known = kInvalidDof;
    for (int i = 0; i < arrays.size(); ++i) {
      const DofIndex d = arrays.dofs(i)[0];
      if (d == kInvalidDof) continue;
      if (known != kInvalidDof && known != d)
        throw std::runtime_error("conflicting ghost data");
      known = d;
    }
    if (known == kInvalidDof) return;
    for (int i = 0; i < arrays.size(); ++i) arrays.dofs(i)[0] = known;
  });
  store.for_each_edge([&](const EdgeKey&, EntityDofStore::ArraysRef arrays) {
    if (arrays.size() < 2) return;  // one edge joins at most two elements in 2D
    const auto a = arrays.dofs(0);
    const auto b = arrays.dofs(1);
    for (const auto& [sa, sb] : collection.unification_pairs(arrays.fe(0), arrays.fe(1))) {
      DofIndex& da = a[sa - 1];
      DofIndex& db = b[sb - 1];
      if (da == kInvalidDof)
        da = db;
      else if (db == kInvalidDof)
        db = da;
      else if (da != db)
        throw std::runtime_error("conflicting ghost data");
    }
  });

  // Stage 7: repeat the ghost exchange, restricted to cells whose stage-5
  // message still contained invalid indices; empty payloads keep the
  // communication pattern symmetric.
  {
    std::map<int, ByteBuffer> outgoing;
    for (const int q : view.neighbor_ranks()) outgoing[q];
    std::size_t owned_position = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!records[i].owned) continue;
      const std::size_t j = owned_position++;
      if (!resend[i]) continue;
      const auto dofs = collect_record_dofs(records[i]);
      ByteBuffer encoded;
      encode_cell(relevant[i], dofs, encoded);
      for (const int q : view.ghost_targets(j))
        outgoing[q].insert(outgoing[q].end(), encoded.begin(), encoded.end());
    }
    const auto ex = fabric.neighbor_exchange(rank, std::move(outgoing), "ghost-exchange-2");
    result.stats.second_exchange_bytes = ex.bytes_sent;
    apply_received(ex.received);
  }

  // Every slot reachable from a relevant cell was allocated in stage 0, so
  // the whole store must be complete now.
  store.for_each_array([&](std::span<DofIndex> arr) {
    for (const DofIndex d : arr)
      if (d == kInvalidDof) throw std::runtime_error("incomplete ghost closure");
  });

  std::vector<DofIndex>& all = cache.relevant;
  store.for_each_array([&](std::span<DofIndex> arr) {
    all.insert(all.end(), arr.begin(), arr.end());
  });
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  return result;
}

}  // namespace hpdist

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_DOF_ENUMERATOR_HPP
#define HPDIST_DOF_ENUMERATOR_HPP

#include <unordered_map>
#include <vector>

#include "hpdist/element.hpp"
#include "hpdist/entity_dof_store.hpp"
#include "hpdist/fabric.hpp"
#include "hpdist/local_view.hpp"

namespace hpdist {

/// Active FE index per cell. On input to the enumerator it must cover all
/// locally relevant cells; the owner's value is authoritative.
using ActiveFeMap = std::unordered_map<CellKey, int, CellKeyHash>;

/// Result bookkeeping of a completed enumeration: the global count, the
/// contiguous per-rank index ranges, and the indices visible on this rank.
struct NumberCache {
  DofIndex n_global = 0;
  std::vector<DofIndex> n_per_rank;
  int rank = -1;
  DofIndex owned_begin = 0;
  DofIndex owned_end = 0;
  std::vector<DofIndex> relevant;  ///< sorted distinct indices on owned + ghost cells

  /// Rank whose owned range contains the index; the index must be valid.
  int owner_of_index(DofIndex index) const;
};

struct EnumerationStats {
  std::uint64_t first_exchange_bytes = 0;
  std::uint64_t second_exchange_bytes = 0;
};

struct EnumerationResult {
  EntityDofStore store;
  NumberCache cache;
  EnumerationStats stats;
};

/// One symmetric exchange round filling in the active FE indices of ghost
/// cells from their owners. The input must hold a value for every owned
/// cell.
ActiveFeMap exchange_active_fe_indices(const LocalView& view, const ActiveFeMap& owned_values,
                                       Fabric& fabric);

/// Globally unique enumeration of all DoFs on the locally relevant cells.
///
/// Runs the staged algorithm: allocation (0), partition-local enumeration
/// (1), rank tie-break on shared entities of equal elements (2), unification
/// of coincident DoFs between different elements (3), compaction and global
/// shift via an exclusive scan (4), ghost exchange (5), merge of remaining
/// invalid indices on owned/ghost interfaces (6), and a second ghost
/// exchange restricted to cells whose first message still carried invalid
/// entries (7). Afterwards no invalid index remains on any relevant cell.
///
/// Collective over all ranks of the fabric.
EnumerationResult distribute_dofs(const LocalView& view, const ActiveFeMap& active_fe,
                                  const ElementCollection& collection, Fabric& fabric);

}  // namespace hpdist

#endif

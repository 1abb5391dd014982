// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_SEQUENTIAL_ORACLE_HPP
#define HPDIST_SEQUENTIAL_ORACLE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "hpdist/element.hpp"
#include "hpdist/entity_dof_store.hpp"
#include "hpdist/forest.hpp"

namespace hpdist {

/// Single-rank reference enumeration: one index list per leaf in the
/// canonical cell order.
struct SequentialEnumeration {
  std::vector<std::vector<DofIndex>> cell_dofs;
  DofIndex n_dofs = 0;
};

/// Every cell enumerated independently; nothing is shared between cells.
SequentialEnumeration naive_enumerate(const Forest& forest, std::span<const int> fe_of_leaf,
                                      const ElementCollection& collection);

/// Coincident nodal functionals on shared entities receive a single index:
/// vertices always, edge nodes when their support points agree as exact
/// rationals. Nothing unifies across hanging interfaces since the coarse
/// and fine edges are distinct entities. Deterministic Morton-order
/// traversal; matches the staged parallel enumeration on one rank.
SequentialEnumeration unified_enumerate(const Forest& forest, std::span<const int> fe_of_leaf,
                                        const ElementCollection& collection);

/// Grouping of all per-cell nodal functionals by coincidence: same entity
/// and same exact support position. Interior functionals are always alone.
struct NodalClasses {
  std::vector<std::vector<std::size_t>> slot_class;  ///< per leaf, per canonical slot
  std::size_t n_classes = 0;
  std::vector<std::size_t> class_size;  ///< member count per class
};

NodalClasses classify_nodal_functionals(const Forest& forest, std::span<const int> fe_of_leaf,
                                        const ElementCollection& collection);

}  // namespace hpdist

#endif

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_CONSTRAINTS_HPP
#define HPDIST_CONSTRAINTS_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hpdist/dof_enumerator.hpp"
#include "hpdist/local_view.hpp"
#include "hpdist/rational.hpp"

namespace hpdist {

/// One algebraic constraint: the dependent DoF equals an exact-rational
/// combination of master DoFs. Interpolatory rows sum to one; identity
/// constraints have a single master with coefficient one.
struct Constraint {
  DofIndex dof = kInvalidDof;
  std::vector<std::pair<DofIndex, Rational>> entries;  ///< sorted by master index

  Rational row_sum() const {
    Rational s(0);
    for (const auto& [m, c] : entries) s += c;
    return s;
  }
};

enum class ConstraintKind { hp_edge, hanging, identity };

struct ClassifiedConstraint {
  Constraint constraint;
  ConstraintKind kind = ConstraintKind::identity;
};

/// Constraints tying the non-unified edge DoFs of the higher-degree element
/// on a regular shared edge to the trace of the lower-degree element.
/// Coefficients are the lower-degree 1D nodal basis evaluated at the
/// dependent DoF's support point. Equal elements yield no constraints.
std::vector<Constraint> hp_edge_constraints(const EntityDofStore& store,
                                            const ElementCollection& collection,
                                            const EdgeKey& edge, int fe_a, int fe_b);

/// Hanging-node constraints across one 2:1 interface. Every fine-side DoF
/// strictly inside the coarse edge (edge nodes of both fine cells and the
/// midpoint vertex) is interpolated in the master trace space on the coarse
/// edge parameterization. The master degree is the minimum degree of the
/// three adjacent cells whenever that trace is representable among the
/// coarse side's stored DoFs (it divides the coarse degree); otherwise the
/// coarse cell's own degree is used. Rows whose coefficients reduce to a
/// unit vector become identity constraints.
std::vector<Constraint> hanging_edge_constraints(const EntityDofStore& store,
                                                 const ElementCollection& collection,
                                                 const Forest& forest, const CellKey& coarse_cell,
                                                 int coarse_side, int fe_coarse,
                                                 std::span<const CellKey> fine_cells,
                                                 std::span<const int> fe_fine);

/// All interface constraints touching the owned cells of one rank,
/// deduplicated, sorted by dependent index. Requires a completed
/// enumeration.
std::vector<ClassifiedConstraint> build_interface_constraints(const LocalView& view,
                                                              const ActiveFeMap& active_fe,
                                                              const EntityDofStore& store,
                                                              const ElementCollection& collection);

/// Identity constraints of an enumeration: one per coincident nodal
/// functional beyond the first of its class, all chained to a single
/// representative (the smallest index). Empty for the unified scheme.
std::vector<Constraint> identity_constraints(const Forest& forest,
                                             std::span<const int> fe_of_leaf,
                                             const ElementCollection& collection,
                                             const std::vector<std::vector<DofIndex>>& cell_dofs);

/// Resolves chains so that no dependent DoF appears among the masters of
/// another constraint. Coefficients combine exactly; a dependency cycle
/// raises "circular constraint".
std::vector<Constraint> close(std::vector<Constraint> constraints);

/// Text dump, one line per constraint: "dof = c1*m1 + c2*m2 + ...",
/// rationals as p/q, sorted by dependent index.
void dump_constraints(std::ostream& out, std::span<const Constraint> constraints);
std::string constraints_to_string(std::span<const Constraint> constraints);

/// Entity-anchored labels of every vertex and edge DoF in a store: vertex
/// coordinates, or the edge key plus the exact support point. Unification
/// only links slots of one entity and position, so each index carries
/// exactly one label.
std::unordered_map<DofIndex, std::string> dof_anchor_labels(const EntityDofStore& store,
                                                            const ElementCollection& collection);

/// Renders constraints with indices replaced by their labels, every line and
/// its terms sorted, so sets compare equal across rank counts.
std::vector<std::string> render_anchored(std::span<const Constraint> constraints,
                                         const std::unordered_map<DofIndex, std::string>& labels);

/// Partition-independent rendering against a single store.
std::vector<std::string> anchored_constraints(const EntityDofStore& store,
                                              const ElementCollection& collection,
                                              std::span<const Constraint> constraints);

}  // namespace hpdist

#endif

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/constraints.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "hpdist/sequential_oracle.hpp"

namespace hpdist {

namespace {

std::pair<VertexKey, VertexKey> edge_endpoints(const EdgeKey& edge) {
  VertexKey a{edge.x, edge.y};
  VertexKey b = a;
  if (edge.axis == 0)
    b.x += edge.extent;
  else
    b.y += edge.extent;
  return {a, b};
}

/// Trace DoFs of one element along an edge: (canonical parameter, index)
/// covering both endpoint vertices and the edge nodes.
std::vector<std::pair<Rational, DofIndex>> edge_trace(const EntityDofStore& store,
                                                      const ElementCollection& collection,
                                                      const EdgeKey& edge, int fe) {
  const auto [va, vb] = edge_endpoints(edge);
  const int degree = collection[fe].degree();
  std::vector<std::pair<Rational, DofIndex>> trace;
  trace.reserve(degree + 1);
  trace.emplace_back(Rational(0), store.vertex_slots(va, fe)[0]);
  const auto& slots = store.edge_slots(edge, fe);
  for (int j = 0; j + 1 < degree; ++j) trace.emplace_back(Rational(j + 1, degree), slots[j]);
  trace.emplace_back(Rational(1), store.vertex_slots(vb, fe)[0]);
  return trace;
}

/// Row interpolating the point x in the trace space: nonzero basis values
/// against the trace DoFs.
Constraint interpolation_row(DofIndex dependent, int master_degree,
                             const std::vector<std::pair<Rational, DofIndex>>& masters,
                             const Rational& x) {
  const std::vector<Rational> basis = lagrange_basis_1d(master_degree, x);
  Constraint c;
  c.dof = dependent;
  for (std::size_t i = 0; i < masters.size(); ++i) {
    if (basis[i] == Rational(0)) continue;
    c.entries.emplace_back(masters[i].second, basis[i]);
  }
  std::sort(c.entries.begin(), c.entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return c;
}

}  // namespace

std::vector<Constraint> hp_edge_constraints(const EntityDofStore& store,
                                            const ElementCollection& collection,
                                            const EdgeKey& edge, int fe_a, int fe_b) {
  const int low = collection.dominating_index(fe_a, fe_b);
  const int high = (low == fe_a) ? fe_b : fe_a;
  if (collection[low].degree() == collection[high].degree()) return {};

  std::vector<bool> unified(collection[high].dofs_per_edge(), false);
  for (const auto& [a, b] : collection.unification_pairs(low, high)) unified[b - 1] = true;

  const auto masters = edge_trace(store, collection, edge, low);
  const int k_low = collection[low].degree();
  const int k_high = collection[high].degree();
  const auto& high_slots = store.edge_slots(edge, high);

  std::vector<Constraint> out;
  for (int j = 0; j < collection[high].dofs_per_edge(); ++j) {
    if (unified[j]) continue;
    out.push_back(interpolation_row(high_slots[j], k_low, masters, Rational(j + 1, k_high)));
  }
  return out;
}

std::vector<Constraint> hanging_edge_constraints(const EntityDofStore& store,
                                                 const ElementCollection& collection,
                                                 const Forest& forest, const CellKey& coarse_cell,
                                                 int coarse_side, int fe_coarse,
                                                 std::span<const CellKey> fine_cells,
                                                 std::span<const int> fe_fine) {
  if (fine_cells.size() != 2 || fe_fine.size() != 2)
    throw std::invalid_argument("a 2:1 interface has exactly two fine cells");
  for (const CellKey& f : fine_cells)
    if (f.level != coarse_cell.level + 1)
      throw std::invalid_argument("not a hanging interface");

  const EdgeKey coarse_edge = forest.entities_of(coarse_cell).edges[coarse_side];
  const int k_coarse = collection[fe_coarse].degree();
  int k_master = std::min({k_coarse, collection[fe_fine[0]].degree(),
                           collection[fe_fine[1]].degree()});
  // The master trace must consist of stored coarse-side DoFs.
  if (k_coarse % k_master != 0) k_master = k_coarse;

  // Master DoFs: the subset of the coarse trace at the k_master node points.
  const auto coarse_trace = edge_trace(store, collection, coarse_edge, fe_coarse);
  std::vector<std::pair<Rational, DofIndex>> masters;
  masters.reserve(k_master + 1);
  for (int i = 0; i <= k_master; ++i) {
    const Rational x(i, k_master);
    const auto it = std::find_if(coarse_trace.begin(), coarse_trace.end(),
                                 [&](const auto& t) { return t.first == x; });
    if (it == coarse_trace.end()) throw std::logic_error("master trace node not stored");
    masters.emplace_back(x, it->second);
  }

  // The fine side of the interface, ordered so the half starting at the
  // coarse edge origin comes first.
  const int fine_side = coarse_side ^ 1;
  std::array<int, 2> order{0, 1};
  {
    const EdgeKey e0 = forest.entities_of(fine_cells[0]).edges[fine_side];
    if (!(e0.x == coarse_edge.x && e0.y == coarse_edge.y)) order = {1, 0};
  }

  std::vector<Constraint> out;
  for (int half = 0; half < 2; ++half) {
    const int f = order[half];
    const EdgeKey fine_edge = forest.entities_of(fine_cells[f]).edges[fine_side];
    if (fine_edge.axis != coarse_edge.axis || fine_edge.extent * 2 != coarse_edge.extent)
      throw std::invalid_argument("not a hanging interface");
    const int k_f = collection[fe_fine[f]].degree();
    const auto& slots = store.edge_slots(fine_edge, fe_fine[f]);
    for (int j = 0; j + 1 < k_f; ++j) {
      const Rational x = Rational(j + 1, 2 * k_f) + Rational(half, 2);
      out.push_back(interpolation_row(slots[j], k_master, masters, x));
    }
  }

  // The hanging vertex in the middle of the coarse edge.
  VertexKey mid{coarse_edge.x, coarse_edge.y};
  if (coarse_edge.axis == 0)
    mid.x += coarse_edge.extent / 2;
  else
    mid.y += coarse_edge.extent / 2;
  const DofIndex mid_dof = store.vertex_slots(mid, fe_fine[0])[0];
  out.push_back(interpolation_row(mid_dof, k_master, masters, Rational(1, 2)));
  return out;
}

std::vector<ClassifiedConstraint> build_interface_constraints(const LocalView& view,
                                                              const ActiveFeMap& active_fe,
                                                              const EntityDofStore& store,
                                                              const ElementCollection& collection) {
  const Forest& forest = view.forest();
  const auto fe_of = [&](const CellKey& cell) { return active_fe.at(cell); };

  std::set<EdgeKey> done;
  std::vector<ClassifiedConstraint> out;

  const auto handle_hanging = [&](const CellKey& coarse, int side,
                                  const LocalView::SideRelation& rel) {
    const EdgeKey key = forest.entities_of(coarse).edges[side];
    if (!done.insert(key).second) return;
    const std::array<CellKey, 2> fine{rel.cells[0], rel.cells[1]};
    const std::array<int, 2> fe_fine{fe_of(fine[0]), fe_of(fine[1])};
    for (auto& c : hanging_edge_constraints(store, collection, forest, coarse, side,
                                            fe_of(coarse), fine, fe_fine)) {
      const bool identity = c.entries.size() == 1 && c.entries.front().second == Rational(1);
      out.push_back({std::move(c), identity ? ConstraintKind::identity : ConstraintKind::hanging});
    }
  };

  for (const CellKey& cell : view.owned()) {
    for (int side = 0; side < 4; ++side) {
      const auto rel = view.side_relation(cell, side);
      switch (rel.kind) {
        case LocalView::SideRelation::Kind::boundary:
          break;
        case LocalView::SideRelation::Kind::equal: {
          if (fe_of(cell) == fe_of(rel.cells[0])) break;
          const EdgeKey key = forest.entities_of(cell).edges[side];
          if (!done.insert(key).second) break;
          for (auto& c :
               hp_edge_constraints(store, collection, key, fe_of(cell), fe_of(rel.cells[0])))
            out.push_back({std::move(c), ConstraintKind::hp_edge});
          break;
        }
        case LocalView::SideRelation::Kind::finer:
          handle_hanging(cell, side, rel);
          break;
        case LocalView::SideRelation::Kind::coarser: {
          const CellKey coarse = rel.cells[0];
          const int opposite = side ^ 1;
          const auto fine_rel = view.side_relation(coarse, opposite);
          if (fine_rel.kind != LocalView::SideRelation::Kind::finer)
            throw std::logic_error("inconsistent hanging relation");
          handle_hanging(coarse, opposite, fine_rel);
          break;
        }
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const ClassifiedConstraint& a,
                                       const ClassifiedConstraint& b) {
    return a.constraint.dof < b.constraint.dof;
  });
  return out;
}

std::vector<Constraint> identity_constraints(const Forest& forest,
                                             std::span<const int> fe_of_leaf,
                                             const ElementCollection& collection,
                                             const std::vector<std::vector<DofIndex>>& cell_dofs) {
  const NodalClasses classes = classify_nodal_functionals(forest, fe_of_leaf, collection);
  if (cell_dofs.size() != forest.n_leaves())
    throw std::invalid_argument("one DoF list per leaf required");

  std::vector<std::set<DofIndex>> members(classes.n_classes);
  for (std::size_t i = 0; i < cell_dofs.size(); ++i) {
    if (cell_dofs[i].size() != classes.slot_class[i].size())
      throw std::invalid_argument("DoF list does not match the element on the cell");
    for (std::size_t s = 0; s < cell_dofs[i].size(); ++s)
      members[classes.slot_class[i][s]].insert(cell_dofs[i][s]);
  }

  std::vector<Constraint> out;
  for (const auto& group : members) {
    if (group.size() < 2) continue;
    const DofIndex representative = *group.begin();
    for (auto it = std::next(group.begin()); it != group.end(); ++it)
      out.push_back(Constraint{*it, {{representative, Rational(1)}}});
  }
  std::sort(out.begin(), out.end(),
            [](const Constraint& a, const Constraint& b) { return a.dof < b.dof; });
  return out;
}

std::vector<Constraint> close(std::vector<Constraint> constraints) {
  std::unordered_map<DofIndex, std::size_t> row_of;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    if (!row_of.emplace(constraints[i].dof, i).second)
      throw std::invalid_argument("two constraints for the same DoF");
  }

  enum class State : std::uint8_t { open, resolving, done };
  std::vector<State> state(constraints.size(), State::open);

  const std::function<void(std::size_t)> resolve = [&](std::size_t i) {
    if (state[i] == State::done) return;
    if (state[i] == State::resolving) throw std::runtime_error("circular constraint");
    state[i] = State::resolving;

    std::map<DofIndex, Rational> combined;
    for (const auto& [master, coeff] : constraints[i].entries) {
      const auto it = row_of.find(master);
      if (it == row_of.end()) {
        combined[master] += coeff;
        continue;
      }
      resolve(it->second);
      for (const auto& [m2, c2] : constraints[it->second].entries) combined[m2] += coeff * c2;
    }
    constraints[i].entries.clear();
    for (const auto& [m, c] : combined)
      if (!(c == Rational(0))) constraints[i].entries.emplace_back(m, c);
    state[i] = State::done;
  };

  for (std::size_t i = 0; i < constraints.size(); ++i) resolve(i);
  return constraints;
}

void dump_constraints(std::ostream& out, std::span<const Constraint> constraints) {
  std::vector<const Constraint*> sorted;
  sorted.reserve(constraints.size());
  for (const Constraint& c : constraints) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(),
            [](const Constraint* a, const Constraint* b) { return a->dof < b->dof; });
  for (const Constraint* c : sorted) {
    out << c->dof << " =";
    bool first = true;
    for (const auto& [m, coeff] : c->entries) {
      out << (first ? " " : " + ") << coeff.str() << "*" << m;
      first = false;
    }
    out << '\n';
  }
}

std::string constraints_to_string(std::span<const Constraint> constraints) {
  std::ostringstream os;
  dump_constraints(os, constraints);
  return os.str();
}

std::unordered_map<DofIndex, std::string> dof_anchor_labels(const EntityDofStore& store,
                                                            const ElementCollection& collection) {
  std::unordered_map<DofIndex, std::string> label;
  store.for_each_vertex([&](const VertexKey& v, EntityDofStore::ConstArraysRef arrays) {
    for (int i = 0; i < arrays.size(); ++i)
      label.emplace(arrays.dofs(i)[0],
                    "v:" + std::to_string(v.x) + "," + std::to_string(v.y));
  });
  store.for_each_edge([&](const EdgeKey& e, EntityDofStore::ConstArraysRef arrays) {
    const std::string base = "e:" + std::to_string(e.x) + "," + std::to_string(e.y) + "," +
                             std::to_string(e.axis) + "," + std::to_string(e.extent) + "@";
    for (int i = 0; i < arrays.size(); ++i) {
      const auto points = collection[arrays.fe(i)].edge_support_points();
      const auto dofs = arrays.dofs(i);
      for (std::size_t j = 0; j < dofs.size(); ++j)
        label.emplace(dofs[j], base + points[j].str());
    }
  });
  return label;
}

std::vector<std::string> render_anchored(std::span<const Constraint> constraints,
                                         const std::unordered_map<DofIndex, std::string>& labels) {
  const auto label_of = [&](DofIndex d) -> const std::string& {
    const auto it = labels.find(d);
    if (it == labels.end()) throw std::invalid_argument("constraint references an unlabeled DoF");
    return it->second;
  };

  std::vector<std::string> out;
  out.reserve(constraints.size());
  for (const Constraint& c : constraints) {
    // Render entries in label order so the line is identical for every
    // partition of the same mesh.
    std::vector<std::string> terms;
    terms.reserve(c.entries.size());
    for (const auto& [m, coeff] : c.entries) terms.push_back(coeff.str() + "*" + label_of(m));
    std::sort(terms.begin(), terms.end());
    std::string line = label_of(c.dof) + " =";
    for (const std::string& t : terms) line += " + " + t;
    out.push_back(std::move(line));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> anchored_constraints(const EntityDofStore& store,
                                              const ElementCollection& collection,
                                              std::span<const Constraint> constraints) {
  return render_anchored(constraints, dof_anchor_labels(store, collection));
}

}  // namespace hpdist

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/sequential_oracle.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace hpdist {

namespace {

void check_inputs(const Forest& forest, std::span<const int> fe_of_leaf) {
  if (fe_of_leaf.size() != forest.n_leaves())
    throw std::invalid_argument("one active FE index per leaf required");
}

}  // namespace

SequentialEnumeration naive_enumerate(const Forest& forest, std::span<const int> fe_of_leaf,
                                      const ElementCollection& collection) {
  check_inputs(forest, fe_of_leaf);
  SequentialEnumeration out;
  out.cell_dofs.resize(forest.n_leaves());
  DofIndex next = 0;
  for (std::size_t i = 0; i < forest.n_leaves(); ++i) {
    const int n = collection[fe_of_leaf[i]].dofs_per_cell();
    out.cell_dofs[i].resize(n);
    for (int s = 0; s < n; ++s) out.cell_dofs[i][s] = next++;
  }
  out.n_dofs = next;
  return out;
}

NodalClasses classify_nodal_functionals(const Forest& forest, std::span<const int> fe_of_leaf,
                                        const ElementCollection& collection) {
  check_inputs(forest, fe_of_leaf);
  NodalClasses out;
  out.slot_class.resize(forest.n_leaves());

  std::map<VertexKey, std::size_t> vertex_class;
  std::map<std::pair<EdgeKey, Rational>, std::size_t> edge_class;

  const auto new_class = [&out] {
    out.class_size.push_back(0);
    return out.n_classes++;
  };

  for (std::size_t i = 0; i < forest.n_leaves(); ++i) {
    const CellKey& cell = forest.leaves()[i];
    const int fe = fe_of_leaf[i];
    const LagrangeElement& el = collection[fe];
    const CellEntities ents = forest.entities_of(cell);
    auto& classes = out.slot_class[i];
    classes.reserve(el.dofs_per_cell());

    for (const VertexKey& v : ents.vertices) {
      auto [it, inserted] = vertex_class.try_emplace(v, out.n_classes);
      if (inserted) new_class();
      classes.push_back(it->second);
    }
    for (const EdgeKey& e : ents.edges) {
      for (const Rational& x : el.edge_support_points()) {
        auto [it, inserted] = edge_class.try_emplace({e, x}, out.n_classes);
        if (inserted) new_class();
        classes.push_back(it->second);
      }
    }
    for (int s = 0; s < el.dofs_per_interior(); ++s) classes.push_back(new_class());

    for (const std::size_t c : classes) ++out.class_size[c];
  }
  return out;
}

SequentialEnumeration unified_enumerate(const Forest& forest, std::span<const int> fe_of_leaf,
                                        const ElementCollection& collection) {
  check_inputs(forest, fe_of_leaf);

  // First pass: provisional numbers per (entity, element, slot), first touch
  // in Morton traversal.
  struct VertexEntry {
    int fe;
    DofIndex prov;
  };
  struct EdgeEntry {
    int fe;
    std::vector<DofIndex> prov;
  };
  std::map<VertexKey, std::vector<VertexEntry>> vertices;
  std::map<EdgeKey, std::vector<EdgeEntry>> edges;

  std::vector<std::vector<DofIndex>> prov_of_cell(forest.n_leaves());
  DofIndex next_prov = 0;

  for (std::size_t i = 0; i < forest.n_leaves(); ++i) {
    const CellKey& cell = forest.leaves()[i];
    const int fe = fe_of_leaf[i];
    const LagrangeElement& el = collection[fe];
    const CellEntities ents = forest.entities_of(cell);
    auto& provs = prov_of_cell[i];

    for (const VertexKey& v : ents.vertices) {
      auto& entries = vertices[v];
      auto found = std::find_if(entries.begin(), entries.end(),
                                [&](const VertexEntry& e) { return e.fe == fe; });
      if (found == entries.end()) {
        entries.push_back({fe, next_prov++});
        found = entries.end() - 1;
      }
      provs.push_back(found->prov);
    }
    for (const EdgeKey& e : ents.edges) {
      auto& entries = edges[e];
      auto found = std::find_if(entries.begin(), entries.end(),
                                [&](const EdgeEntry& en) { return en.fe == fe; });
      if (found == entries.end()) {
        entries.push_back({fe, {}});
        found = entries.end() - 1;
        for (int j = 0; j < el.dofs_per_edge(); ++j) found->prov.push_back(next_prov++);
      }
      provs.insert(provs.end(), found->prov.begin(), found->prov.end());
    }
    for (int s = 0; s < el.dofs_per_interior(); ++s) provs.push_back(next_prov++);
  }

  // Second pass: coincident provisional numbers collapse onto the number
  // held by the element of lowest degree.
  std::vector<DofIndex> representative(next_prov);
  for (DofIndex p = 0; p < next_prov; ++p) representative[p] = p;

  for (const auto& [key, entries] : vertices) {
    const VertexEntry* dom = &entries.front();
    for (const auto& e : entries)
      if (collection[e.fe].degree() < collection[dom->fe].degree()) dom = &e;
    for (const auto& e : entries) representative[e.prov] = dom->prov;
  }
  for (const auto& [key, entries] : edges) {
    if (entries.size() < 2) continue;
    std::map<Rational, std::vector<const EdgeEntry*>> groups;
    std::map<Rational, std::vector<DofIndex>> group_prov;
    for (const auto& e : entries) {
      const auto points = collection[e.fe].edge_support_points();
      for (std::size_t j = 0; j < e.prov.size(); ++j) {
        groups[points[j]].push_back(&e);
        group_prov[points[j]].push_back(e.prov[j]);
      }
    }
    for (const auto& [x, members] : groups) {
      if (members.size() < 2) continue;
      std::size_t dom = 0;
      for (std::size_t k = 1; k < members.size(); ++k)
        if (collection[members[k]->fe].degree() < collection[members[dom]->fe].degree()) dom = k;
      const DofIndex target = group_prov.at(x)[dom];
      for (const DofIndex p : group_prov.at(x)) representative[p] = target;
    }
  }

  // Third pass: final indices follow the ascending order of the surviving
  // provisional numbers.
  std::vector<DofIndex> survivors;
  for (DofIndex p = 0; p < next_prov; ++p)
    if (representative[p] == p) survivors.push_back(p);
  std::vector<DofIndex> final_of_prov(next_prov, kInvalidDof);
  for (std::size_t k = 0; k < survivors.size(); ++k) final_of_prov[survivors[k]] = k;

  SequentialEnumeration out;
  out.n_dofs = survivors.size();
  out.cell_dofs.resize(forest.n_leaves());
  for (std::size_t i = 0; i < forest.n_leaves(); ++i) {
    out.cell_dofs[i].reserve(prov_of_cell[i].size());
    for (const DofIndex p : prov_of_cell[i])
      out.cell_dofs[i].push_back(final_of_prov[representative[p]]);
  }
  return out;
}

}  // namespace hpdist

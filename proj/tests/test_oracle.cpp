// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/sequential_oracle.hpp"

#include <doctest.h>

#include <set>

#include "test_support.hpp"

using namespace hpdist;
using namespace hpdist::testing;

namespace {
const ElementCollection collection = ElementCollection::lagrange_range(1, 12);

std::vector<int> fe_of(const std::vector<int>& degrees) {
  std::vector<int> out(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i) out[i] = collection.index_of_degree(degrees[i]);
  return out;
}
}  // namespace

TEST_CASE("two-cell Q2|Q4 mesh") {
  const Forest forest = fig1_forest();
  const auto fes = fe_of(fig1_degrees());
  const auto naive = naive_enumerate(forest, fes, collection);
  CHECK(naive.n_dofs == 34);
  CHECK(naive.cell_dofs[0].size() == 9);
  CHECK(naive.cell_dofs[1].size() == 25);
  const auto unified = unified_enumerate(forest, fes, collection);
  CHECK(unified.n_dofs == 31);
}

TEST_CASE("four-cell Q2,Q4/Q4,Q2 mesh") {
  const Forest forest = fig2_forest();
  const auto fes = fe_of(fig2_degrees());
  CHECK(naive_enumerate(forest, fes, collection).n_dofs == 9 + 25 + 25 + 9);
  CHECK(unified_enumerate(forest, fes, collection).n_dofs == 57);
}

TEST_CASE("uniform 2x2 grid of Q1: distinct vertices") {
  const Forest forest = Forest(TreeLayout::unit_square()).refined_uniformly(1);
  const std::vector<int> fes(4, collection.index_of_degree(1));
  CHECK(naive_enumerate(forest, fes, collection).n_dofs == 16);
  CHECK(unified_enumerate(forest, fes, collection).n_dofs == 9);
}

TEST_CASE("unified indices are consecutive and every cell list is valid") {
  const RandomMesh mesh = random_mesh(31, 4);
  const auto fes = fe_of(mesh.degrees);
  const auto unified = unified_enumerate(mesh.forest, fes, collection);
  std::set<DofIndex> seen;
  for (const auto& dofs : unified.cell_dofs)
    for (const DofIndex d : dofs) {
      CHECK(d < unified.n_dofs);
      seen.insert(d);
    }
  CHECK(seen.size() == unified.n_dofs);
}

TEST_CASE("savings identity: naive minus unified equals the class excess") {
  for (const std::uint32_t seed : {5u, 6u, 7u}) {
    const RandomMesh mesh = random_mesh(seed, 4);
    const auto fes = fe_of(mesh.degrees);
    const auto naive = naive_enumerate(mesh.forest, fes, collection);
    const auto unified = unified_enumerate(mesh.forest, fes, collection);
    const auto classes = classify_nodal_functionals(mesh.forest, fes, collection);
    std::uint64_t excess = 0;
    for (const std::size_t size : classes.class_size) excess += size - 1;
    CHECK(naive.n_dofs - unified.n_dofs == excess);
  }
}

TEST_CASE("hanging interfaces never unify") {
  // one refined child next to a coarse cell: the coarse edge keeps its own
  // DoFs and the fine midpoint vertex is separate
  Forest base = Forest(TreeLayout::unit_square()).refined_uniformly(1);
  std::vector<AdaptFlag> flags(4, AdaptFlag::keep);
  flags[0] = AdaptFlag::refine;
  const Forest forest = base.refine_and_coarsen(flags).forest;
  const std::vector<int> fes(forest.n_leaves(), collection.index_of_degree(2));
  const auto unified = unified_enumerate(forest, fes, collection);
  // Q2 everywhere: 7 cells, count classes by hand: 13 vertices + 18 edges
  // + 7 interiors = 38
  std::set<VertexKey> vertices;
  std::set<EdgeKey> edges;
  for (const CellKey& cell : forest.leaves()) {
    const auto ents = forest.entities_of(cell);
    vertices.insert(ents.vertices.begin(), ents.vertices.end());
    edges.insert(ents.edges.begin(), ents.edges.end());
  }
  CHECK(unified.n_dofs == vertices.size() + edges.size() + forest.n_leaves());
}

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_TESTS_TEST_SUPPORT_HPP
#define HPDIST_TESTS_TEST_SUPPORT_HPP

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "hpdist/dof_enumerator.hpp"
#include "hpdist/forest.hpp"
#include "hpdist/local_view.hpp"

namespace hpdist::testing {

/// Two unit cells side by side, degrees Q2 | Q4.
inline Forest fig1_forest() { return Forest(TreeLayout::two_cells()); }
inline std::vector<int> fig1_degrees() { return {2, 4}; }

/// Four cells around a central vertex, degrees Q2, Q4 / Q4, Q2.
inline Forest fig2_forest() { return Forest(TreeLayout::unit_square()).refined_uniformly(1); }
inline std::vector<int> fig2_degrees() { return {2, 4, 4, 2}; }

struct RankOutcome {
  LocalView view;
  ActiveFeMap active_fe;
  EnumerationResult enumeration;
};

/// Runs the full enumeration on a simulated fabric and returns every rank's
/// outcome. The forest must outlive the returned views.
inline std::vector<RankOutcome> enumerate_parallel(const Forest& forest,
                                                   std::span<const int> owner,
                                                   std::span<const int> degrees,
                                                   const ElementCollection& collection,
                                                   int n_ranks) {
  Fabric fabric(n_ranks);
  std::vector<std::optional<RankOutcome>> slots(n_ranks);
  run_on_ranks(fabric, [&](int rank) {
    LocalView view(forest, owner, rank, n_ranks);
    ActiveFeMap owned;
    for (const CellKey& cell : view.owned())
      owned.emplace(cell, collection.index_of_degree(degrees[forest.index_of(cell)]));
    ActiveFeMap active_fe = exchange_active_fe_indices(view, owned, fabric);
    EnumerationResult enumeration = distribute_dofs(view, active_fe, collection, fabric);
    slots[rank].emplace(
        RankOutcome{std::move(view), std::move(active_fe), std::move(enumeration)});
  });
  std::vector<RankOutcome> out;
  out.reserve(n_ranks);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Random adapted L-shape forest with random degrees, degree-smoothed so
/// edge neighbors differ by at most one.
struct RandomMesh {
  Forest forest;
  std::vector<int> degrees;
};

inline RandomMesh random_mesh(std::uint32_t seed, int rounds, int degree_min = 2,
                              int degree_max = 7, std::size_t cell_cap = 5000) {
  std::mt19937 rng(seed);
  Forest forest = Forest(TreeLayout::l_shape()).refined_uniformly(2);
  for (int round = 0; round < rounds; ++round) {
    if (forest.n_leaves() > cell_cap) break;
    std::vector<AdaptFlag> flags(forest.n_leaves(), AdaptFlag::keep);
    std::uniform_int_distribution<int> dice(0, 9);
    for (auto& f : flags) {
      const int roll = dice(rng);
      if (roll < 3)
        f = AdaptFlag::refine;
      else if (roll < 5)
        f = AdaptFlag::coarsen;
    }
    forest = forest.refine_and_coarsen(flags).forest;
  }

  std::vector<int> degrees(forest.n_leaves());
  std::uniform_int_distribution<int> degree_dice(degree_min, degree_max);
  for (auto& d : degrees) d = degree_dice(rng);

  // sequential raise-only smoothing until every edge pair differs by <= 1
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < forest.n_leaves(); ++i) {
      for (int side = 0; side < 4; ++side) {
        const auto n = forest.side_neighbors(i, side);
        for (int k = 0; k < n.count; ++k) {
          if (degrees[i] < degrees[n.index[k]] - 1) {
            degrees[i] = degrees[n.index[k]] - 1;
            changed = true;
          }
        }
      }
    }
  }
  return {std::move(forest), std::move(degrees)};
}

}  // namespace hpdist::testing

#endif

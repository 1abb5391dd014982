// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/forest.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace hpdist;

namespace {

// Brute-force 2:1 oracle: two leaves are edge neighbors when their closed
// boxes overlap along a segment; compare levels over all pairs.
bool brute_force_balanced(const Forest& forest) {
  const auto& leaves = forest.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto [ax, ay] = forest.global_anchor(leaves[i]);
    const std::uint64_t ah = leaves[i].extent();
    for (std::size_t j = i + 1; j < leaves.size(); ++j) {
      const auto [bx, by] = forest.global_anchor(leaves[j]);
      const std::uint64_t bh = leaves[j].extent();
      const bool touch_x = ax <= bx + bh && bx <= ax + ah;
      const bool touch_y = ay <= by + bh && by <= ay + ah;
      if (!touch_x || !touch_y) continue;
      const bool overlap_x = ax < bx + bh && bx < ax + ah;
      const bool overlap_y = ay < by + bh && by < ay + ah;
      const bool edge_adjacent = (overlap_x && !overlap_y) || (overlap_y && !overlap_x);
      if (!edge_adjacent) continue;
      const int delta = int(leaves[i].level) - int(leaves[j].level);
      if (delta < -1 || delta > 1) return false;
    }
  }
  return true;
}

Forest random_forest(std::uint32_t seed, int rounds, std::size_t cap = 4000) {
  std::mt19937 rng(seed);
  Forest forest = Forest(TreeLayout::l_shape()).refined_uniformly(2);
  for (int round = 0; round < rounds; ++round) {
    if (forest.n_leaves() > cap) break;
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
  return forest;
}

}  // namespace

TEST_CASE("uniform refinement of a root produces four children") {
  Forest forest{TreeLayout::unit_square()};
  std::vector<AdaptFlag> flags{AdaptFlag::refine};
  const auto result = forest.refine_and_coarsen(flags);
  CHECK(result.forest.n_leaves() == 4);
  for (const auto& origin : result.origins) {
    CHECK(origin.kind == AdaptOrigin::Kind::descendant);
    CHECK(origin.old_index == 0);
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(result.forest.leaves()[i].level == 1);
}

TEST_CASE("coarsening a full sibling quad restores the parent") {
  Forest forest = Forest(TreeLayout::unit_square()).refined_uniformly(1);
  std::vector<AdaptFlag> flags(4, AdaptFlag::coarsen);
  const auto result = forest.refine_and_coarsen(flags);
  CHECK(result.forest.n_leaves() == 1);
  CHECK(result.forest.leaves()[0].level == 0);
  CHECK(result.origins[0].kind == AdaptOrigin::Kind::parent);
  CHECK(result.origins[0].old_index == 0);
}

TEST_CASE("deep refinement forces 2:1 balance on the diagonal neighbor") {
  Forest forest = Forest(TreeLayout::unit_square()).refined_uniformly(1);
  // refine one child twice; every edge neighbor must end within one level
  std::vector<AdaptFlag> flags(4, AdaptFlag::keep);
  flags[0] = AdaptFlag::refine;
  Forest once = forest.refine_and_coarsen(flags).forest;
  std::vector<AdaptFlag> flags2(once.n_leaves(), AdaptFlag::keep);
  flags2[0] = AdaptFlag::refine;  // the lowest Morton leaf sits at the corner
  Forest twice = once.refine_and_coarsen(flags2).forest;
  CHECK(twice.is_balanced());
  CHECK(brute_force_balanced(twice));
  // the diagonal-opposite sibling can stay at level 1 but the edge-adjacent
  // siblings must have been split
  for (std::size_t i = 0; i < twice.n_leaves(); ++i) CHECK(twice.leaves()[i].level >= 1);
}

TEST_CASE("balancing an already balanced forest changes nothing") {
  Forest forest = random_forest(7, 4);
  REQUIRE(forest.is_balanced());
  std::vector<AdaptFlag> keep(forest.n_leaves(), AdaptFlag::keep);
  const auto result = forest.refine_and_coarsen(keep);
  CHECK(result.forest.leaves() == forest.leaves());
  for (std::size_t i = 0; i < result.origins.size(); ++i) {
    CHECK(result.origins[i].kind == AdaptOrigin::Kind::kept);
    CHECK(result.origins[i].old_index == i);
  }
}

TEST_CASE("covered area is conserved through arbitrary adaptation") {
  const unsigned __int128 unit = (unsigned __int128)(1ull << kMaxLevel) * (1ull << kMaxLevel);
  for (std::uint32_t seed : {1u, 2u, 3u}) {
    const Forest forest = random_forest(seed, 5);
    CHECK(forest.covered_area() == unit * 3);
    CHECK(forest.is_balanced());
    CHECK(brute_force_balanced(forest));
  }
}

TEST_CASE("refining past the maximum depth is an error") {
  // drive the corner leaf all the way down; balance grows a staircase
  Forest forest{TreeLayout::unit_square()};
  for (int l = 0; l < kMaxLevel; ++l) {
    std::vector<AdaptFlag> flags(forest.n_leaves(), AdaptFlag::keep);
    flags[0] = AdaptFlag::refine;
    forest = forest.refine_and_coarsen(flags).forest;
  }
  CHECK(forest.leaves()[0].level == kMaxLevel);
  CHECK(forest.is_balanced());
  std::vector<AdaptFlag> flags(forest.n_leaves(), AdaptFlag::keep);
  flags[0] = AdaptFlag::refine;
  CHECK_THROWS_WITH_AS(forest.refine_and_coarsen(flags), "depth exceeded", std::runtime_error);
}

TEST_CASE("entity keys of a root cell") {
  Forest forest{TreeLayout::unit_square()};
  const auto ents = forest.entities_of(forest.leaves()[0]);
  const std::uint64_t side = 1ull << kMaxLevel;
  CHECK(ents.vertices[0] == VertexKey{0, 0});
  CHECK(ents.vertices[1] == VertexKey{side, 0});
  CHECK(ents.vertices[2] == VertexKey{0, side});
  CHECK(ents.vertices[3] == VertexKey{side, side});
  CHECK(ents.edges[0] == EdgeKey{0, 0, 1, std::uint32_t(side)});       // left
  CHECK(ents.edges[1] == EdgeKey{side, 0, 1, std::uint32_t(side)});    // right
  CHECK(ents.edges[2] == EdgeKey{0, 0, 0, std::uint32_t(side)});       // bottom
  CHECK(ents.edges[3] == EdgeKey{0, side, 0, std::uint32_t(side)});    // top
}

TEST_CASE("two equal neighbors compute the same shared edge key") {
  Forest forest = Forest(TreeLayout::unit_square()).refined_uniformly(1);
  const auto left = forest.entities_of(forest.leaves()[0]);
  const auto right = forest.entities_of(forest.leaves()[1]);
  CHECK(left.edges[1] == right.edges[0]);
  CHECK(left.vertices[1] == right.vertices[0]);
  CHECK(left.vertices[3] == right.vertices[2]);
}

TEST_CASE("hanging configuration: coarse and fine edge keys differ") {
  // refine only the left-bottom child: its right neighbor stays coarse
  Forest forest = Forest(TreeLayout::unit_square()).refined_uniformly(1);
  std::vector<AdaptFlag> flags(4, AdaptFlag::keep);
  flags[0] = AdaptFlag::refine;
  Forest mixed = forest.refine_and_coarsen(flags).forest;
  REQUIRE(mixed.n_leaves() == 7);

  // leaves 0..3 are the fine children, leaf 4 is the coarse right neighbor
  const CellKey coarse = mixed.leaves()[4];
  REQUIRE(coarse.level == 1);
  const auto coarse_ents = mixed.entities_of(coarse);
  const CellKey fine_low = mixed.leaves()[1];
  const CellKey fine_high = mixed.leaves()[3];
  const auto low_ents = mixed.entities_of(fine_low);
  const auto high_ents = mixed.entities_of(fine_high);

  // one coarse edge, two distinct fine edges, all different keys
  CHECK(coarse_ents.edges[0] != low_ents.edges[1]);
  CHECK(coarse_ents.edges[0] != high_ents.edges[1]);
  CHECK(low_ents.edges[1] != high_ents.edges[1]);
  // the hanging midpoint vertex is shared by the fine cells only
  CHECK(low_ents.vertices[3] == high_ents.vertices[1]);
  const VertexKey hanging = low_ents.vertices[3];
  for (const auto& v : coarse_ents.vertices) CHECK(v != hanging);
  // the coarse edge endpoints coincide with the outer fine corners
  CHECK(coarse_ents.vertices[0] == low_ents.vertices[1]);
  CHECK(coarse_ents.vertices[2] == high_ents.vertices[3]);
}

TEST_CASE("side neighbors across the L-shape tree boundaries") {
  Forest forest{TreeLayout::l_shape()};
  REQUIRE(forest.n_leaves() == 3);
  // tree 0 (bottom-left): top neighbor is tree 1, right side is the
  // reentrant boundary
  const auto top = forest.side_neighbors(0, 3);
  REQUIRE(top.count == 1);
  CHECK(forest.leaves()[top.index[0]].tree == 1);
  CHECK(forest.side_neighbors(0, 1).count == 0);
  // tree 1: right neighbor is tree 2
  const auto right = forest.side_neighbors(1, 1);
  REQUIRE(right.count == 1);
  CHECK(forest.leaves()[right.index[0]].tree == 2);
  // tree 2: bottom is the other reentrant boundary
  CHECK(forest.side_neighbors(2, 2).count == 0);
  // corner adjacency of tree 0 and tree 2 across the reentrant corner
  const auto diag = forest.corner_neighbor(0, 3);
  REQUIRE(diag.has_value());
  CHECK(forest.leaves()[*diag].tree == 2);
}

TEST_CASE("find_leaf locates the containing cell") {
  const Forest forest = random_forest(11, 4);
  std::mt19937 rng(5);
  const std::uint64_t side = 1ull << kMaxLevel;
  std::uniform_int_distribution<std::uint64_t> coord(0, 2 * side - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t x = coord(rng), y = coord(rng);
    const auto leaf = forest.find_leaf(x, y);
    const bool in_domain = (x < side && y < side) || y >= side;
    REQUIRE(leaf.has_value() == in_domain);
    if (!leaf) continue;
    const auto [ax, ay] = forest.global_anchor(forest.leaves()[*leaf]);
    const std::uint64_t h = forest.leaves()[*leaf].extent();
    CHECK(ax <= x);
    CHECK(x < ax + h);
    CHECK(ay <= y);
    CHECK(y < ay + h);
  }
}

TEST_CASE("mesh dump format") {
  Forest forest = Forest(TreeLayout::unit_square()).refined_uniformly(1);
  std::vector<int> degrees{2, 4, 4, 2};
  std::vector<int> owners{0, 0, 1, 1};
  std::ostringstream os;
  forest.dump(os, degrees, owners);
  const std::uint32_t h = 1u << (kMaxLevel - 1);
  std::ostringstream expected;
  expected << "0 1 0 0 2 0\n"
           << "0 1 " << h << " 0 4 0\n"
           << "0 1 0 " << h << " 4 1\n"
           << "0 1 " << h << ' ' << h << " 2 1\n";
  CHECK(os.str() == expected.str());
}

TEST_CASE("from_leaves validates its input") {
  const Forest forest = random_forest(3, 3);
  const Forest rebuilt = Forest::from_leaves(forest.layout(), forest.leaves());
  CHECK(rebuilt.leaves() == forest.leaves());
  auto broken = forest.leaves();
  broken.pop_back();
  CHECK_THROWS(Forest::from_leaves(forest.layout(), broken));
}

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_FOREST_HPP
#define HPDIST_FOREST_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hpdist/cell_key.hpp"

namespace hpdist {

enum class AdaptFlag : std::uint8_t { keep, refine, coarsen };

/// Placement of the unit trees in a shared global frame, in units of the
/// tree side length. Trees touching along an edge or corner are connected;
/// this is how the multi-tree domains are wired together.
struct TreeLayout {
  std::vector<std::array<std::uint32_t, 2>> origins;

  static TreeLayout unit_square();
  /// Two unit trees side by side.
  static TreeLayout two_cells();
  /// Three unit trees forming an L around a reentrant corner; the corner
  /// sits at the shared point of all three trees.
  static TreeLayout l_shape();
};

/// Entity keys of one cell: vertices in the order (0,0),(1,0),(0,1),(1,1)
/// relative to the anchor, edges in the order left, right, bottom, top.
struct CellEntities {
  std::array<VertexKey, 4> vertices;
  std::array<EdgeKey, 4> edges;
};

/// How a leaf of an adapted forest relates to the previous forest.
struct AdaptOrigin {
  enum class Kind : std::uint8_t {
    kept,        ///< same cell, old_index names it
    descendant,  ///< obtained by refining the old leaf old_index (possibly repeatedly)
    parent       ///< replaces four old sibling leaves; old_index is the first of them
  };
  Kind kind = Kind::kept;
  std::size_t old_index = 0;
};

struct AdaptResult;

/// Distributed-ready 2D forest of quadtrees: a Morton-ordered sequence of
/// leaves covering every tree exactly once, kept 2:1 balanced across edges.
/// Immutable after construction; adaptation produces a new forest.
class Forest {
 public:
  /// One root leaf per tree.
  explicit Forest(TreeLayout layout);

  /// Reassembles a forest from stored leaves (checkpoint restore).
  /// Validates ordering, exact cover, and 2:1 balance.
  static Forest from_leaves(TreeLayout layout, std::vector<CellKey> leaves);

  const TreeLayout& layout() const { return layout_; }
  const std::vector<CellKey>& leaves() const { return leaves_; }
  std::size_t n_leaves() const { return leaves_.size(); }

  /// Anchor of the cell in the global frame (tree origins applied).
  std::pair<std::uint64_t, std::uint64_t> global_anchor(const CellKey& cell) const;

  CellEntities entities_of(const CellKey& cell) const;

  /// Leaf containing the global point, if the point lies inside the domain.
  std::optional<std::size_t> find_leaf(std::uint64_t gx, std::uint64_t gy) const;

  /// Exact position of a leaf; throws if the cell is not a leaf.
  std::size_t index_of(const CellKey& cell) const;

  /// Leaves sharing a part of the given side of leaf i. Sides are numbered
  /// left, right, bottom, top. At most two by 2:1 balance.
  struct SideNeighbors {
    std::array<std::size_t, 2> index{};
    int count = 0;
  };
  SideNeighbors side_neighbors(std::size_t leaf, int side) const;

  /// The leaf diagonally across the given corner (order: (0,0),(1,0),(0,1),
  /// (1,1)), if any. May coincide with an edge neighbor when that neighbor
  /// is coarser.
  std::optional<std::size_t> corner_neighbor(std::size_t leaf, int corner) const;

  /// All leaves whose closure touches the closure of leaf i (edge- and
  /// vertex-adjacent), deduplicated, sorted by index.
  std::vector<std::size_t> adjacent_leaves(std::size_t leaf) const;

  Forest refined_uniformly(int times) const;

  /// Applies per-leaf flags, then restores 2:1 balance by further
  /// refinement. Coarsening happens only where all four siblings carry the
  /// coarsen flag, and is undone where it would break balance; refinement is
  /// never undone. Refining a leaf at the maximum level throws
  /// "depth exceeded".
  AdaptResult refine_and_coarsen(std::span<const AdaptFlag> flags) const;

  /// True if every pair of edge-neighboring leaves differs by at most one
  /// level.
  bool is_balanced() const;

  /// Total covered area in squared depth-units; equals
  /// n_trees * 4^kMaxLevel for any valid forest.
  unsigned __int128 covered_area() const;

  /// One leaf per line: "tree level anchor_x anchor_y degree owner", in
  /// Morton order.
  void dump(std::ostream& out, std::span<const int> degrees, std::span<const int> owners) const;

 private:
  Forest(TreeLayout layout, std::vector<CellKey> leaves);

  void rebuild_tree_index();
  std::optional<std::uint32_t> tree_containing(std::uint64_t gx, std::uint64_t gy) const;
  // Balances in place, recording forced refinements through the origins.
  static void balance(const Forest& reference_layout, std::vector<CellKey>& leaves,
                      std::vector<AdaptOrigin>& origins);

  TreeLayout layout_;
  std::vector<CellKey> leaves_;             // sorted by (tree, morton)
  std::vector<std::size_t> tree_begin_;     // per tree, begin index into leaves_
};

struct AdaptResult {
  Forest forest;
  std::vector<AdaptOrigin> origins;  ///< one per leaf of the new forest
};

}  // namespace hpdist

#endif

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_LOCAL_VIEW_HPP
#define HPDIST_LOCAL_VIEW_HPP

#include <span>
#include <unordered_map>
#include <vector>

#include "hpdist/forest.hpp"

namespace hpdist {

/// One rank's window into the distributed forest: the cells it owns, plus a
/// ghost layer of every cell that is edge- or vertex-adjacent to an owned
/// cell but owned elsewhere. Corner neighbors are part of the layer because
/// vertex indices at subdomain cross points come from diagonal owners.
class LocalView {
 public:
  LocalView(const Forest& forest, std::span<const int> owner_of, int rank, int n_ranks);

  const Forest& forest() const { return *forest_; }
  int rank() const { return rank_; }
  int n_ranks() const { return n_ranks_; }

  /// Owned cells in Morton order.
  const std::vector<CellKey>& owned() const { return owned_; }
  /// Ghost cells in Morton order.
  const std::vector<CellKey>& ghosts() const { return ghosts_; }
  /// Owned and ghost cells merged, Morton order.
  std::vector<CellKey> relevant() const;

  bool is_owned(const CellKey& cell) const;
  bool is_relevant(const CellKey& cell) const;
  /// Owning rank of an owned or ghost cell; throws for cells outside the
  /// relevant set.
  int owner_of(const CellKey& cell) const;

  /// Ranks owning at least one ghost cell, sorted.
  const std::vector<int>& neighbor_ranks() const { return neighbor_ranks_; }

  /// For the i-th owned cell, the sorted ranks on which that cell lies in
  /// the ghost layer.
  const std::vector<int>& ghost_targets(std::size_t owned_index) const {
    return ghost_targets_.at(owned_index);
  }

  /// Relation of a relevant cell to its neighbors across one side.
  struct SideRelation {
    enum class Kind { boundary, equal, finer, coarser } kind = Kind::boundary;
    std::array<CellKey, 2> cells{};  ///< one cell, or two for Kind::finer
    int count = 0;
  };
  SideRelation side_relation(const CellKey& cell, int side) const;

 private:
  const Forest* forest_;
  int rank_;
  int n_ranks_;
  std::vector<CellKey> owned_;
  std::vector<CellKey> ghosts_;
  std::vector<std::vector<int>> ghost_targets_;
  std::unordered_map<CellKey, int, CellKeyHash> owner_map_;  // relevant cells only
  std::vector<int> neighbor_ranks_;
};

}  // namespace hpdist

#endif

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/local_view.hpp"

#include <algorithm>
#include <stdexcept>

namespace hpdist {

LocalView::LocalView(const Forest& forest, std::span<const int> owner_of, int rank, int n_ranks)
    : forest_(&forest), rank_(rank), n_ranks_(n_ranks) {
  const auto& leaves = forest.leaves();
  if (owner_of.size() != leaves.size())
    throw std::invalid_argument("one owner per leaf required");
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (owner_of[i] < 0 || owner_of[i] >= n_ranks)
      throw std::invalid_argument("owner rank out of range");

  std::vector<std::size_t> owned_indices;
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (owner_of[i] == rank) owned_indices.push_back(i);

  owned_.reserve(owned_indices.size());
  ghost_targets_.resize(owned_indices.size());
  std::vector<std::size_t> ghost_indices;

  for (std::size_t j = 0; j < owned_indices.size(); ++j) {
    const std::size_t i = owned_indices[j];
    owned_.push_back(leaves[i]);
    owner_map_.emplace(leaves[i], rank);
    for (const std::size_t adj : forest.adjacent_leaves(i)) {
      if (owner_of[adj] == rank) continue;
      ghost_indices.push_back(adj);
      ghost_targets_[j].push_back(owner_of[adj]);
    }
    auto& targets = ghost_targets_[j];
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  }

  std::sort(ghost_indices.begin(), ghost_indices.end());
  ghost_indices.erase(std::unique(ghost_indices.begin(), ghost_indices.end()),
                      ghost_indices.end());
  ghosts_.reserve(ghost_indices.size());
  for (const std::size_t i : ghost_indices) {
    ghosts_.push_back(leaves[i]);
    owner_map_.emplace(leaves[i], owner_of[i]);
    neighbor_ranks_.push_back(owner_of[i]);
  }
  std::sort(neighbor_ranks_.begin(), neighbor_ranks_.end());
  neighbor_ranks_.erase(std::unique(neighbor_ranks_.begin(), neighbor_ranks_.end()),
                        neighbor_ranks_.end());
}

std::vector<CellKey> LocalView::relevant() const {
  std::vector<CellKey> cells;
  cells.reserve(owned_.size() + ghosts_.size());
  std::merge(owned_.begin(), owned_.end(), ghosts_.begin(), ghosts_.end(),
             std::back_inserter(cells));
  return cells;
}

bool LocalView::is_owned(const CellKey& cell) const {
  auto it = owner_map_.find(cell);
  return it != owner_map_.end() && it->second == rank_;
}

bool LocalView::is_relevant(const CellKey& cell) const { return owner_map_.count(cell) != 0; }

int LocalView::owner_of(const CellKey& cell) const {
  auto it = owner_map_.find(cell);
  if (it == owner_map_.end()) throw std::runtime_error("cell is not locally relevant");
  return it->second;
}

LocalView::SideRelation LocalView::side_relation(const CellKey& cell, int side) const {
  const std::size_t index = forest_->index_of(cell);
  const auto n = forest_->side_neighbors(index, side);
  SideRelation rel;
  rel.count = n.count;
  if (n.count == 0) return rel;
  const auto& leaves = forest_->leaves();
  for (int i = 0; i < n.count; ++i) rel.cells[i] = leaves[n.index[i]];
  const int delta = int(rel.cells[0].level) - int(cell.level);
  if (n.count == 2 || delta > 0)
    rel.kind = SideRelation::Kind::finer;
  else if (delta < 0)
    rel.kind = SideRelation::Kind::coarser;
  else
    rel.kind = SideRelation::Kind::equal;
  return rel;
}

}  // namespace hpdist

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/forest.hpp"

#include <algorithm>
#include <ostream>
#include <set>
#include <stdexcept>

namespace hpdist {

namespace {
constexpr std::uint64_t kTreeSide = 1ull << kMaxLevel;
}

TreeLayout TreeLayout::unit_square() { return TreeLayout{{{0, 0}}}; }

TreeLayout TreeLayout::two_cells() { return TreeLayout{{{0, 0}, {1, 0}}}; }

TreeLayout TreeLayout::l_shape() {
  // Bottom-left, top-left, top-right quadrants of (-1,1)^2; the quadrant to
  // the bottom-right is missing, so the reentrant corner is the point shared
  // by all three trees.
  return TreeLayout{{{0, 0}, {0, 1}, {1, 1}}};
}

Forest::Forest(TreeLayout layout) : layout_(std::move(layout)) {
  if (layout_.origins.empty()) throw std::invalid_argument("layout without trees");
  leaves_.reserve(layout_.origins.size());
  for (std::uint32_t t = 0; t < layout_.origins.size(); ++t)
    leaves_.push_back(CellKey{t, 0, 0, 0});
  rebuild_tree_index();
}

Forest::Forest(TreeLayout layout, std::vector<CellKey> leaves)
    : layout_(std::move(layout)), leaves_(std::move(leaves)) {
  rebuild_tree_index();
}

Forest Forest::from_leaves(TreeLayout layout, std::vector<CellKey> leaves) {
  for (const CellKey& k : leaves) {
    if (k.tree >= layout.origins.size() || k.level > kMaxLevel)
      throw std::runtime_error("corrupt forest leaf");
    const std::uint32_t h = k.extent();
    if (k.anchor_x % h != 0 || k.anchor_y % h != 0)
      throw std::runtime_error("corrupt forest leaf");
  }
  if (!std::is_sorted(leaves.begin(), leaves.end()))
    throw std::runtime_error("forest leaves out of order");
  Forest forest(std::move(layout), std::move(leaves));
  const unsigned __int128 tree_area =
      (unsigned __int128)(1ull << kMaxLevel) * (1ull << kMaxLevel);
  if (forest.covered_area() != tree_area * forest.layout_.origins.size())
    throw std::runtime_error("forest leaves do not cover the domain");
  if (!forest.is_balanced()) throw std::runtime_error("forest leaves are not 2:1 balanced");
  return forest;
}

void Forest::rebuild_tree_index() {
  tree_begin_.assign(layout_.origins.size() + 1, leaves_.size());
  for (std::size_t i = leaves_.size(); i-- > 0;) tree_begin_[leaves_[i].tree] = i;
  // trees without leaves would leave gaps; propagate from the right
  for (std::size_t t = layout_.origins.size(); t-- > 0;)
    if (tree_begin_[t] > tree_begin_[t + 1]) tree_begin_[t] = tree_begin_[t + 1];
}

std::pair<std::uint64_t, std::uint64_t> Forest::global_anchor(const CellKey& cell) const {
  const auto& origin = layout_.origins.at(cell.tree);
  return {std::uint64_t(origin[0]) * kTreeSide + cell.anchor_x,
          std::uint64_t(origin[1]) * kTreeSide + cell.anchor_y};
}

CellEntities Forest::entities_of(const CellKey& cell) const {
  const auto [gx, gy] = global_anchor(cell);
  const std::uint32_t h = cell.extent();
  CellEntities e;
  e.vertices[0] = {gx, gy};
  e.vertices[1] = {gx + h, gy};
  e.vertices[2] = {gx, gy + h};
  e.vertices[3] = {gx + h, gy + h};
  e.edges[0] = {gx, gy, 1, h};          // left
  e.edges[1] = {gx + h, gy, 1, h};      // right
  e.edges[2] = {gx, gy, 0, h};          // bottom
  e.edges[3] = {gx, gy + h, 0, h};      // top
  return e;
}

std::optional<std::uint32_t> Forest::tree_containing(std::uint64_t gx, std::uint64_t gy) const {
  for (std::uint32_t t = 0; t < layout_.origins.size(); ++t) {
    const std::uint64_t ox = std::uint64_t(layout_.origins[t][0]) * kTreeSide;
    const std::uint64_t oy = std::uint64_t(layout_.origins[t][1]) * kTreeSide;
    if (gx >= ox && gx < ox + kTreeSide && gy >= oy && gy < oy + kTreeSide) return t;
  }
  return std::nullopt;
}

std::optional<std::size_t> Forest::find_leaf(std::uint64_t gx, std::uint64_t gy) const {
  const auto tree = tree_containing(gx, gy);
  if (!tree) return std::nullopt;
  const std::uint64_t ox = std::uint64_t(layout_.origins[*tree][0]) * kTreeSide;
  const std::uint64_t oy = std::uint64_t(layout_.origins[*tree][1]) * kTreeSide;
  const std::uint64_t code =
      morton_interleave(static_cast<std::uint32_t>(gx - ox), static_cast<std::uint32_t>(gy - oy));
  const auto begin = leaves_.begin() + tree_begin_[*tree];
  const auto end = leaves_.begin() + tree_begin_[*tree + 1];
  // Leaves of a tree tile its Morton range; the containing leaf is the last
  // one whose code does not exceed the point's code.
  auto it = std::upper_bound(begin, end, code,
                             [](std::uint64_t c, const CellKey& k) { return c < k.morton(); });
  if (it == begin) return std::nullopt;
  --it;
  const std::uint64_t span = std::uint64_t(it->extent()) * it->extent();
  if (code >= it->morton() + span) return std::nullopt;
  return static_cast<std::size_t>(it - leaves_.begin());
}

std::size_t Forest::index_of(const CellKey& cell) const {
  auto it = std::lower_bound(leaves_.begin(), leaves_.end(), cell);
  if (it == leaves_.end() || !(*it == cell)) throw std::runtime_error("cell is not a leaf");
  return static_cast<std::size_t>(it - leaves_.begin());
}

Forest::SideNeighbors Forest::side_neighbors(std::size_t leaf, int side) const {
  const CellKey& cell = leaves_.at(leaf);
  const auto [gx, gy] = global_anchor(cell);
  const std::uint64_t h = cell.extent();

  // Two sample points just across the side, at the quarter points, reach
  // every neighbor: by 2:1 balance there are at most two.
  std::uint64_t sx[2], sy[2];
  const std::uint64_t q1 = h / 4, q3 = (3 * h) / 4;
  switch (side) {
    case 0:  // left
      if (gx == 0) return {};
      sx[0] = sx[1] = gx - 1;
      sy[0] = gy + q1;
      sy[1] = gy + q3;
      break;
    case 1:  // right
      sx[0] = sx[1] = gx + h;
      sy[0] = gy + q1;
      sy[1] = gy + q3;
      break;
    case 2:  // bottom
      if (gy == 0) return {};
      sy[0] = sy[1] = gy - 1;
      sx[0] = gx + q1;
      sx[1] = gx + q3;
      break;
    case 3:  // top
      sy[0] = sy[1] = gy + h;
      sx[0] = gx + q1;
      sx[1] = gx + q3;
      break;
    default:
      throw std::out_of_range("side index");
  }

  SideNeighbors result;
  for (int s = 0; s < 2; ++s) {
    const auto found = find_leaf(sx[s], sy[s]);
    if (!found) continue;
    if (result.count == 1 && result.index[0] == *found) continue;
    result.index[result.count++] = *found;
  }
  return result;
}

std::optional<std::size_t> Forest::corner_neighbor(std::size_t leaf, int corner) const {
  const CellKey& cell = leaves_.at(leaf);
  const auto [gx, gy] = global_anchor(cell);
  const std::uint64_t h = cell.extent();
  const bool right = corner & 1, top = corner & 2;
  if (!right && gx == 0) return std::nullopt;
  if (!top && gy == 0) return std::nullopt;
  const std::uint64_t px = right ? gx + h : gx - 1;
  const std::uint64_t py = top ? gy + h : gy - 1;
  return find_leaf(px, py);
}

std::vector<std::size_t> Forest::adjacent_leaves(std::size_t leaf) const {
  std::vector<std::size_t> out;
  for (int side = 0; side < 4; ++side) {
    const auto n = side_neighbors(leaf, side);
    for (int i = 0; i < n.count; ++i) out.push_back(n.index[i]);
  }
  for (int corner = 0; corner < 4; ++corner)
    if (const auto n = corner_neighbor(leaf, corner)) out.push_back(*n);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Forest Forest::refined_uniformly(int times) const {
  std::vector<CellKey> current = leaves_;
  for (int round = 0; round < times; ++round) {
    std::vector<CellKey> next;
    next.reserve(current.size() * 4);
    for (const CellKey& cell : current)
      for (int c = 0; c < 4; ++c) next.push_back(cell.child(c));
    current = std::move(next);
  }
  return Forest(layout_, std::move(current));
}

void Forest::balance(const Forest& reference, std::vector<CellKey>& leaves,
                     std::vector<AdaptOrigin>& origins) {
  for (;;) {
    Forest scratch(reference.layout_, leaves);
    std::vector<bool> split(leaves.size(), false);
    bool any = false;
    for (std::size_t i = 0; i < scratch.leaves_.size(); ++i) {
      for (int side = 0; side < 4; ++side) {
        const auto n = scratch.side_neighbors(i, side);
        for (int k = 0; k < n.count; ++k) {
          if (scratch.leaves_[n.index[k]].level > scratch.leaves_[i].level + 1) {
            split[i] = true;
            any = true;
          }
        }
      }
    }
    if (!any) return;

    std::vector<CellKey> next;
    std::vector<AdaptOrigin> next_origins;
    next.reserve(leaves.size() + 3 * leaves.size() / 4);
    next_origins.reserve(next.capacity());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (!split[i]) {
        next.push_back(leaves[i]);
        next_origins.push_back(origins[i]);
        continue;
      }
      for (int c = 0; c < 4; ++c) {
        next.push_back(leaves[i].child(c));
        // Re-splitting an undone coarsening restores the original leaves;
        // everything else becomes a descendant of the flagged old leaf.
        if (origins[i].kind == AdaptOrigin::Kind::parent)
          next_origins.push_back({AdaptOrigin::Kind::kept, origins[i].old_index + c});
        else
          next_origins.push_back({AdaptOrigin::Kind::descendant, origins[i].old_index});
      }
    }
    leaves = std::move(next);
    origins = std::move(next_origins);
  }
}

AdaptResult Forest::refine_and_coarsen(std::span<const AdaptFlag> flags) const {
  if (flags.size() != leaves_.size())
    throw std::invalid_argument("one adaptation flag per leaf required");
  for (std::size_t i = 0; i < leaves_.size(); ++i)
    if (flags[i] == AdaptFlag::refine && leaves_[i].level == kMaxLevel)
      throw std::runtime_error("depth exceeded");

  std::vector<CellKey> next;
  std::vector<AdaptOrigin> origins;
  next.reserve(leaves_.size());
  origins.reserve(leaves_.size());

  const auto coarsenable_quad = [&](std::size_t i) {
    if (i + 3 >= leaves_.size()) return false;
    const CellKey parent0 = leaves_[i].level > 0 ? leaves_[i].parent() : CellKey{};
    if (leaves_[i].level == 0) return false;
    for (int c = 0; c < 4; ++c) {
      const CellKey& k = leaves_[i + c];
      if (flags[i + c] != AdaptFlag::coarsen) return false;
      if (k.level != leaves_[i].level || k.tree != leaves_[i].tree) return false;
      if (k.child_index() != c || !(k.parent() == parent0)) return false;
    }
    return true;
  };

  for (std::size_t i = 0; i < leaves_.size();) {
    if (flags[i] == AdaptFlag::coarsen && coarsenable_quad(i)) {
      next.push_back(leaves_[i].parent());
      origins.push_back({AdaptOrigin::Kind::parent, i});
      i += 4;
    } else if (flags[i] == AdaptFlag::refine) {
      for (int c = 0; c < 4; ++c) {
        next.push_back(leaves_[i].child(c));
        origins.push_back({AdaptOrigin::Kind::descendant, i});
      }
      ++i;
    } else {
      next.push_back(leaves_[i]);
      origins.push_back({AdaptOrigin::Kind::kept, i});
      ++i;
    }
  }

  balance(*this, next, origins);
  return AdaptResult{Forest(layout_, std::move(next)), std::move(origins)};
}

bool Forest::is_balanced() const {
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    for (int side = 0; side < 4; ++side) {
      const auto n = side_neighbors(i, side);
      for (int k = 0; k < n.count; ++k) {
        const int delta = int(leaves_[n.index[k]].level) - int(leaves_[i].level);
        if (delta < -1 || delta > 1) return false;
      }
    }
  }
  return true;
}

unsigned __int128 Forest::covered_area() const {
  unsigned __int128 area = 0;
  for (const CellKey& k : leaves_) {
    const unsigned __int128 h = k.extent();
    area += h * h;
  }
  return area;
}

void Forest::dump(std::ostream& out, std::span<const int> degrees,
                  std::span<const int> owners) const {
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const CellKey& k = leaves_[i];
    out << k.tree << ' ' << int(k.level) << ' ' << k.anchor_x << ' ' << k.anchor_y << ' '
        << (i < degrees.size() ? degrees[i] : 0) << ' ' << (i < owners.size() ? owners[i] : 0)
        << '\n';
  }
}

}  // namespace hpdist

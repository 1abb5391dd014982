// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_CELL_KEY_HPP
#define HPDIST_CELL_KEY_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>

#include "hpdist/bytes.hpp"

namespace hpdist {

/// Deepest admissible refinement level. Anchors live on the 2^30 grid of a
/// unit tree, so coordinates always fit 32 bits.
inline constexpr int kMaxLevel = 30;

/// Interleaves two 32-bit coordinates into a Z-order code (x occupies the
/// even bits, so the child order within a quadrant is bottom-left,
/// bottom-right, top-left, top-right).
inline std::uint64_t morton_interleave(std::uint64_t x, std::uint64_t y) {
  auto spread = [](std::uint64_t v) {
    v &= 0xffffffffull;
    v = (v | (v << 16)) & 0x0000ffff0000ffffull;
    v = (v | (v << 8)) & 0x00ff00ff00ff00ffull;
    v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0full;
    v = (v | (v << 2)) & 0x3333333333333333ull;
    v = (v | (v << 1)) & 0x5555555555555555ull;
    return v;
  };
  return spread(x) | (spread(y) << 1);
}

/// Identifies one quadrant of the forest: tree index, refinement level, and
/// the anchor (lower-left corner) on the depth-kMaxLevel integer grid of its
/// tree. Equal on every rank that stores the cell.
struct CellKey {
  std::uint32_t tree = 0;
  std::uint8_t level = 0;
  std::uint32_t anchor_x = 0;
  std::uint32_t anchor_y = 0;

  /// Side length in depth-units.
  std::uint32_t extent() const { return 1u << (kMaxLevel - level); }

  std::uint64_t morton() const { return morton_interleave(anchor_x, anchor_y); }

  CellKey child(int i) const {
    if (level >= kMaxLevel) throw std::runtime_error("depth exceeded");
    const std::uint32_t h = extent() / 2;
    CellKey c = *this;
    c.level = static_cast<std::uint8_t>(level + 1);
    c.anchor_x += (i & 1) ? h : 0;
    c.anchor_y += (i & 2) ? h : 0;
    return c;
  }

  CellKey parent() const {
    if (level == 0) throw std::runtime_error("root cell has no parent");
    const std::uint32_t h = extent() * 2;
    CellKey p = *this;
    p.level = static_cast<std::uint8_t>(level - 1);
    p.anchor_x &= ~(h - 1);
    p.anchor_y &= ~(h - 1);
    return p;
  }

  int child_index() const {
    const std::uint32_t h = extent();
    return ((anchor_x & h) ? 1 : 0) | ((anchor_y & h) ? 2 : 0);
  }

  friend bool operator==(const CellKey&, const CellKey&) = default;
  friend bool operator<(const CellKey& a, const CellKey& b) {
    if (a.tree != b.tree) return a.tree < b.tree;
    const std::uint64_t ma = a.morton(), mb = b.morton();
    if (ma != mb) return ma < mb;
    return a.level < b.level;
  }
};

/// Inverse of morton_interleave for one axis (pass code for x, code >> 1
/// for y).
inline std::uint64_t morton_compact(std::uint64_t v) {
  v &= 0x5555555555555555ull;
  v = (v | (v >> 1)) & 0x3333333333333333ull;
  v = (v | (v >> 2)) & 0x0f0f0f0f0f0f0f0full;
  v = (v | (v >> 4)) & 0x00ff00ff00ff00ffull;
  v = (v | (v >> 8)) & 0x0000ffff0000ffffull;
  v = (v | (v >> 16)) & 0x00000000ffffffffull;
  return v;
}

/// Bit mixer for hashing: anchors and entity coordinates are multiples of
/// large powers of two, so hashes must not preserve low-bit structure.
inline std::uint64_t hash_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    return static_cast<std::size_t>(
        hash_mix(k.morton() ^ hash_mix(std::uint64_t(k.tree) << 8 | k.level)));
  }
};

inline void append_cell_key(ByteBuffer& buf, const CellKey& k) {
  append_u32(buf, k.tree);
  append_u8(buf, k.level);
  append_u32(buf, k.anchor_x);
  append_u32(buf, k.anchor_y);
}

inline CellKey read_cell_key(ByteReader& r) {
  CellKey k;
  k.tree = r.read_u32();
  k.level = r.read_u8();
  k.anchor_x = r.read_u32();
  k.anchor_y = r.read_u32();
  return k;
}

/// Canonical identifier of a mesh vertex, in forest-global depth-units so
/// that every adjacent cell computes the same key regardless of its tree.
struct VertexKey {
  std::uint64_t x = 0;
  std::uint64_t y = 0;
  friend bool operator==(const VertexKey&, const VertexKey&) = default;
  friend bool operator<(const VertexKey& a, const VertexKey& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  }
};

struct VertexKeyHash {
  std::size_t operator()(const VertexKey& v) const {
    return static_cast<std::size_t>(hash_mix(v.x ^ hash_mix(v.y)));
  }
};

/// Space-filling-curve order on vertices; cells visited in Morton order
/// touch vertices almost sequentially under this comparator.
struct VertexKeyMortonLess {
  bool operator()(const VertexKey& a, const VertexKey& b) const {
    return morton_interleave(a.x, a.y) < morton_interleave(b.x, b.y);
  }
};

/// Canonical identifier of a mesh edge: the lexicographically smaller
/// endpoint, the axis it runs along, and its length in depth-units. The
/// canonical parameterization runs from the stored origin towards
/// increasing coordinate. Hanging interfaces produce distinct keys for the
/// coarse edge and the two half-length fine edges.
struct EdgeKey {
  std::uint64_t x = 0;
  std::uint64_t y = 0;
  std::uint8_t axis = 0;  // 0: runs along x, 1: runs along y
  std::uint32_t extent = 0;
  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
  friend bool operator<(const EdgeKey& a, const EdgeKey& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    if (a.axis != b.axis) return a.axis < b.axis;
    return a.extent < b.extent;
  }
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& e) const {
    const std::uint64_t tag = (std::uint64_t(e.axis) << 32) | e.extent;
    return static_cast<std::size_t>(hash_mix(e.x ^ hash_mix(e.y ^ hash_mix(tag))));
  }
};

/// Space-filling-curve order on edges, by the Morton code of the origin.
struct EdgeKeyMortonLess {
  bool operator()(const EdgeKey& a, const EdgeKey& b) const {
    const std::uint64_t ca = morton_interleave(a.x, a.y);
    const std::uint64_t cb = morton_interleave(b.x, b.y);
    if (ca != cb) return ca < cb;
    if (a.axis != b.axis) return a.axis < b.axis;
    return a.extent < b.extent;
  }
};

}  // namespace hpdist

#endif

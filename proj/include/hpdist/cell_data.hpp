// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_CELL_DATA_HPP
#define HPDIST_CELL_DATA_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hpdist/cell_key.hpp"
#include "hpdist/fabric.hpp"

namespace hpdist {

/// Variable-size per-cell payloads in one contiguous buffer with an offsets
/// array, the way sparse matrix rows are stored: the payload of cell j
/// occupies data[offsets[j] .. offsets[j+1]).
struct PackedCellData {
  std::vector<CellKey> cells;
  std::vector<std::uint64_t> offsets;  ///< size cells.size()+1, offsets[0] == 0
  ByteBuffer data;

  std::span<const std::uint8_t> payload(std::size_t j) const {
    return {data.data() + offsets[j], data.data() + offsets[j + 1]};
  }

  friend bool operator==(const PackedCellData&, const PackedCellData&) = default;
};

/// Two-stage packing: size every payload and build the offsets, then copy.
/// Cell order is preserved; empty payloads are fine.
PackedCellData pack(std::span<const CellKey> cells,
                    const std::function<ByteBuffer(const CellKey&)>& payload_of);

/// Reorders a packing so cells bound for the same destination form one
/// contiguous run (runs ordered by destination rank, Morton order within).
PackedCellData sort_for_transfer(const PackedCellData& packed,
                                 const std::function<int(const CellKey&)>& destination_of);

struct TransferResult {
  PackedCellData received;        ///< newly owned cells' payloads, Morton order
  std::uint64_t bytes_sent = 0;   ///< this rank's outgoing bytes (offsets + data)
};

/// Moves payloads from old owners to new owners. `mine` must hold exactly
/// the this-rank cells of `old_owner` (per-leaf, aligned with `cells`),
/// sorted so same-destination cells are contiguous. Each flow is one offsets
/// message plus one data message; locally retained payloads never touch the
/// fabric. Collective.
TransferResult repartition_transfer(std::span<const CellKey> cells,
                                    std::span<const int> old_owner,
                                    std::span<const int> new_owner, const PackedCellData& mine,
                                    int rank, Fabric& fabric);

/// Writes a packing to disk: magic "HPDK", version, cell count, cell keys,
/// offsets, raw data, all little-endian. Loading a truncated or foreign file
/// throws without producing a partial result.
void checkpoint_save(const std::string& path, const PackedCellData& packed);
PackedCellData checkpoint_load(const std::string& path);

/// Shard path "<prefix>.rank<p>.hpdk" used for per-rank checkpoints.
std::string checkpoint_shard_path(const std::string& prefix, int rank);

}  // namespace hpdist

#endif

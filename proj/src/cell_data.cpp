// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/cell_data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

namespace hpdist {

namespace {
constexpr std::uint32_t kMagic = 0x4b445048u;  // "HPDK"
constexpr std::uint32_t kVersion = 1;
}  // namespace

PackedCellData pack(std::span<const CellKey> cells,
                    const std::function<ByteBuffer(const CellKey&)>& payload_of) {
  PackedCellData packed;
  packed.cells.assign(cells.begin(), cells.end());
  packed.offsets.resize(cells.size() + 1, 0);

  // First pass: sizes only.
  std::vector<ByteBuffer> payloads;
  payloads.reserve(cells.size());
  for (std::size_t j = 0; j < cells.size(); ++j) {
    payloads.push_back(payload_of(cells[j]));
    packed.offsets[j + 1] = packed.offsets[j] + payloads.back().size();
  }
  // Second pass: copy into the contiguous buffer.
  packed.data.resize(packed.offsets.back());
  for (std::size_t j = 0; j < cells.size(); ++j)
    std::copy(payloads[j].begin(), payloads[j].end(), packed.data.begin() + packed.offsets[j]);
  return packed;
}

PackedCellData sort_for_transfer(const PackedCellData& packed,
                                 const std::function<int(const CellKey&)>& destination_of) {
  std::vector<std::size_t> order(packed.cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int da = destination_of(packed.cells[a]);
    const int db = destination_of(packed.cells[b]);
    if (da != db) return da < db;
    return packed.cells[a] < packed.cells[b];
  });

  PackedCellData out;
  out.cells.reserve(packed.cells.size());
  out.offsets.reserve(packed.offsets.size());
  out.offsets.push_back(0);
  out.data.reserve(packed.data.size());
  for (const std::size_t j : order) {
    out.cells.push_back(packed.cells[j]);
    const auto bytes = packed.payload(j);
    out.data.insert(out.data.end(), bytes.begin(), bytes.end());
    out.offsets.push_back(out.data.size());
  }
  return out;
}

TransferResult repartition_transfer(std::span<const CellKey> cells,
                                    std::span<const int> old_owner,
                                    std::span<const int> new_owner, const PackedCellData& mine,
                                    int rank, Fabric& fabric) {
  if (cells.size() != old_owner.size() || cells.size() != new_owner.size())
    throw std::invalid_argument("owner arrays must match the cell sequence");

  std::map<CellKey, int> destination;
  std::size_t expected_mine = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    destination.emplace(cells[i], new_owner[i]);
    if (old_owner[i] == rank) ++expected_mine;
  }
  if (mine.cells.size() != expected_mine)
    throw std::invalid_argument("packing does not cover exactly the owned cells");

  // Same-destination cells must already form contiguous runs.
  {
    std::map<int, int> run_count;
    int previous = -1;
    for (const CellKey& c : mine.cells) {
      const auto it = destination.find(c);
      if (it == destination.end()) throw std::invalid_argument("unknown cell in packing");
      if (it->second != previous) {
        if (++run_count[it->second] > 1)
          throw std::invalid_argument("cells per destination must be contiguous");
        previous = it->second;
      }
    }
  }

  // One offsets message and one data message per destination; each run is a
  // contiguous window of the two arrays, so no repacking is needed.
  std::map<int, ByteBuffer> header_out, data_out;
  std::map<CellKey, ByteBuffer> retained;
  const auto flows_to = [&](int p, int q) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (old_owner[i] == p && new_owner[i] == q) return true;
    return false;
  };
  // The global partition maps are known everywhere, so both ends of every
  // flow pad with empty messages where needed to keep the pattern symmetric.
  for (int q = 0; q < fabric.n_ranks(); ++q) {
    if (q == rank) continue;
    if (flows_to(rank, q) || flows_to(q, rank)) {
      header_out[q];
      data_out[q];
    }
  }

  for (std::size_t begin = 0; begin < mine.cells.size();) {
    const int dest = destination.at(mine.cells[begin]);
    std::size_t end = begin;
    while (end < mine.cells.size() && destination.at(mine.cells[end]) == dest) ++end;
    if (dest == rank) {
      for (std::size_t j = begin; j < end; ++j) {
        const auto bytes = mine.payload(j);
        retained.emplace(mine.cells[j], ByteBuffer(bytes.begin(), bytes.end()));
      }
    } else {
      ByteBuffer& header = header_out[dest];
      append_u64(header, end - begin);
      for (std::size_t j = begin; j < end; ++j) append_cell_key(header, mine.cells[j]);
      for (std::size_t j = begin; j <= end; ++j)
        append_u64(header, mine.offsets[j] - mine.offsets[begin]);
      ByteBuffer& body = data_out[dest];
      body.insert(body.end(), mine.data.begin() + mine.offsets[begin],
                  mine.data.begin() + mine.offsets[end]);
    }
    begin = end;
  }

  const auto headers = fabric.neighbor_exchange(rank, std::move(header_out), "repartition-offsets");
  const auto bodies = fabric.neighbor_exchange(rank, std::move(data_out), "repartition-data");

  std::map<CellKey, ByteBuffer> incoming = std::move(retained);
  for (const auto& [sender, header] : headers.received) {
    const auto body_it = bodies.received.find(sender);
    if (body_it == bodies.received.end())
      throw std::runtime_error("offsets without matching data message");
    const ByteBuffer& body = body_it->second;
    ByteReader reader(header);
    while (!reader.done()) {
      const std::uint64_t count = reader.read_u64();
      std::vector<CellKey> keys(count);
      for (auto& k : keys) k = read_cell_key(reader);
      std::vector<std::uint64_t> offsets(count + 1);
      for (auto& o : offsets) o = reader.read_u64();
      for (std::size_t j = 0; j < count; ++j) {
        const auto it = destination.find(keys[j]);
        if (it == destination.end() || it->second != rank)
          throw std::runtime_error("destination mismatch: received a cell not newly owned");
        if (offsets[j + 1] > body.size() || offsets[j] > offsets[j + 1])
          throw std::runtime_error("corrupt transfer offsets");
        incoming.emplace(keys[j],
                         ByteBuffer(body.begin() + offsets[j], body.begin() + offsets[j + 1]));
      }
    }
  }

  TransferResult result;
  result.bytes_sent = headers.bytes_sent + bodies.bytes_sent;
  result.received.offsets.push_back(0);
  for (auto& [cell, bytes] : incoming) {  // std::map iterates in Morton order
    result.received.cells.push_back(cell);
    result.received.data.insert(result.received.data.end(), bytes.begin(), bytes.end());
    result.received.offsets.push_back(result.received.data.size());
  }
  return result;
}

void checkpoint_save(const std::string& path, const PackedCellData& packed) {
  ByteBuffer buf;
  append_u32(buf, kMagic);
  append_u32(buf, kVersion);
  append_u64(buf, packed.cells.size());
  for (const CellKey& k : packed.cells) append_cell_key(buf, k);
  for (const std::uint64_t o : packed.offsets) append_u64(buf, o);
  buf.insert(buf.end(), packed.data.begin(), packed.data.end());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

PackedCellData checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  ByteBuffer buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  ByteReader reader(buf);
  PackedCellData packed;
  try {
    if (reader.read_u32() != kMagic) throw std::runtime_error("bad checkpoint magic");
    if (reader.read_u32() != kVersion) throw std::runtime_error("unknown checkpoint version");
    const std::uint64_t count = reader.read_u64();
    packed.cells.resize(count);
    for (auto& k : packed.cells) k = read_cell_key(reader);
    packed.offsets.resize(count + 1);
    for (auto& o : packed.offsets) o = reader.read_u64();
    if (packed.offsets.front() != 0) throw std::runtime_error("corrupt checkpoint offsets");
    for (std::size_t j = 0; j + 1 < packed.offsets.size(); ++j)
      if (packed.offsets[j] > packed.offsets[j + 1])
        throw std::runtime_error("corrupt checkpoint offsets");
    if (reader.remaining() != packed.offsets.back())
      throw std::runtime_error("truncated checkpoint data");
    packed.data.resize(packed.offsets.back());
    reader.read_raw(packed.data.data(), packed.data.size());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("checkpoint load failed: ") + e.what());
  }
  return packed;
}

std::string checkpoint_shard_path(const std::string& prefix, int rank) {
  return prefix + ".rank" + std::to_string(rank) + ".hpdk";
}

}  // namespace hpdist

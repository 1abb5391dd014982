// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_FABRIC_HPP
#define HPDIST_FABRIC_HPP

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "hpdist/bytes.hpp"

namespace hpdist {

/// In-process message-passing fabric for a fixed number of simulated ranks.
/// All operations are collectives: every rank must enter the same operation
/// with the same stage label before any rank proceeds, which makes stages
/// bulk-synchronous and keeps messages from crossing stage boundaries.
/// Mismatched participation (different operation or stage across ranks)
/// aborts all participants with a deadlock error.
///
/// Results depend only on the deposited payloads, never on thread
/// scheduling, so mailbox histories are reproducible. The collectives are
/// virtual: a real message-passing backend can stand in behind the same
/// contract without touching the algorithms written against it.
class Fabric {
 public:
  explicit Fabric(int n_ranks);
  virtual ~Fabric() = default;

  int n_ranks() const { return n_ranks_; }

  /// Exclusive prefix sum: rank p receives the sum of the values deposited
  /// by ranks 0..p-1; rank 0 receives 0.
  virtual std::uint64_t exscan_sum(int rank, std::uint64_t value);

  struct Exchange {
    std::map<int, ByteBuffer> received;  ///< sender rank -> payload
    std::uint64_t bytes_sent = 0;        ///< this rank's outgoing bytes
  };

  /// Point-to-point exchange within one stage. The send pattern must be
  /// symmetric: p addresses q exactly when q addresses p (payloads may be
  /// empty). An asymmetric pattern aborts with "unmatched exchange".
  virtual Exchange neighbor_exchange(int rank, std::map<int, ByteBuffer> outgoing,
                                     const std::string& stage);

  /// Everyone-to-everyone convenience built on neighbor_exchange; returns
  /// the payloads of all ranks in rank order.
  std::vector<ByteBuffer> all_gather(int rank, ByteBuffer payload, const std::string& stage);

  /// Total payload bytes sent through the fabric so far.
  std::uint64_t total_bytes_sent() const;

  /// Record of one delivered message, for determinism checks.
  struct Delivery {
    std::uint64_t round;
    std::string stage;
    int sender;
    int receiver;
    std::uint64_t size;
    std::uint64_t payload_hash;
  };
  /// Snapshot of the delivery history in deterministic order.
  std::vector<Delivery> history() const;

  /// Unblocks every waiting rank with an error; used by the rank harness
  /// when one rank program throws.
  void fail(const std::string& reason);

 private:
  struct Slot {
    std::string op;
    std::string stage;
    std::uint64_t value = 0;
    std::map<int, ByteBuffer> outgoing;
  };

  // Runs the collective once all ranks arrived; called under the lock.
  void complete_round();
  void check_failed() const;

  const int n_ranks_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<Slot> slots_;
  std::vector<std::uint64_t> scan_results_;
  std::vector<std::map<int, ByteBuffer>> exchange_results_;
  int arrived_ = 0;
  int consumed_ = 0;
  bool scattering_ = false;
  std::uint64_t round_ = 0;
  bool failed_ = false;
  std::string failure_;
  std::uint64_t total_bytes_ = 0;
  std::vector<Delivery> history_;
};

/// Runs fn(rank) on one thread per rank. If any rank program throws, the
/// fabric is failed so the other ranks unblock, and the lowest-rank error is
/// rethrown after all threads joined.
void run_on_ranks(Fabric& fabric, const std::function<void(int)>& fn);

}  // namespace hpdist

#endif

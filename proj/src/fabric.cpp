// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/fabric.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace hpdist {

namespace {

std::uint64_t fnv1a(const ByteBuffer& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Fabric::Fabric(int n_ranks) : n_ranks_(n_ranks) {
  if (n_ranks < 1) throw std::invalid_argument("at least one rank required");
  slots_.resize(n_ranks);
  scan_results_.resize(n_ranks);
  exchange_results_.resize(n_ranks);
}

void Fabric::check_failed() const {
  if (failed_) throw std::runtime_error(failure_);
}

void Fabric::complete_round() {
  // Validate matching participation.
  for (int p = 1; p < n_ranks_; ++p) {
    if (slots_[p].op != slots_[0].op || slots_[p].stage != slots_[0].stage) {
      failed_ = true;
      failure_ = "deadlock: collective mismatch between ranks (" + slots_[0].op + "/" +
                 slots_[0].stage + " vs " + slots_[p].op + "/" + slots_[p].stage + ")";
      return;
    }
  }

  if (slots_[0].op == "exscan") {
    std::uint64_t running = 0;
    for (int p = 0; p < n_ranks_; ++p) {
      scan_results_[p] = running;
      running += slots_[p].value;
    }
    return;
  }

  // neighbor exchange: enforce the symmetric pattern, then route.
  for (int p = 0; p < n_ranks_; ++p) {
    for (const auto& [q, payload] : slots_[p].outgoing) {
      if (q < 0 || q >= n_ranks_ || q == p) {
        failed_ = true;
        failure_ = "unmatched exchange: invalid destination rank";
        return;
      }
      if (slots_[q].outgoing.find(p) == slots_[q].outgoing.end()) {
        failed_ = true;
        failure_ = "unmatched exchange: rank " + std::to_string(p) + " sends to rank " +
                   std::to_string(q) + " without a matching send back";
        return;
      }
    }
  }
  for (auto& r : exchange_results_) r.clear();
  for (int p = 0; p < n_ranks_; ++p) {
    for (auto& [q, payload] : slots_[p].outgoing) {
      total_bytes_ += payload.size();
      history_.push_back({round_, slots_[p].stage, p, q, payload.size(), fnv1a(payload)});
      exchange_results_[q].emplace(p, std::move(payload));
    }
  }
}

std::uint64_t Fabric::exscan_sum(int rank, std::uint64_t value) {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return failed_ || !scattering_; });
  check_failed();
  Slot& slot = slots_.at(rank);
  slot.op = "exscan";
  slot.stage.clear();
  slot.value = value;
  const std::uint64_t my_round = round_;
  if (++arrived_ == n_ranks_) {
    complete_round();
    scattering_ = true;
    arrived_ = 0;
    consumed_ = 0;
    cv_.notify_all();
  } else {
    cv_.wait(lock, [&] { return failed_ || (scattering_ && round_ == my_round); });
  }
  check_failed();
  const std::uint64_t result = scan_results_[rank];
  if (++consumed_ == n_ranks_) {
    scattering_ = false;
    ++round_;
    cv_.notify_all();
  }
  return result;
}

Fabric::Exchange Fabric::neighbor_exchange(int rank, std::map<int, ByteBuffer> outgoing,
                                           const std::string& stage) {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return failed_ || !scattering_; });
  check_failed();
  Slot& slot = slots_.at(rank);
  slot.op = "exchange";
  slot.stage = stage;
  std::uint64_t sent = 0;
  for (const auto& [q, payload] : outgoing) sent += payload.size();
  slot.outgoing = std::move(outgoing);
  const std::uint64_t my_round = round_;
  if (++arrived_ == n_ranks_) {
    complete_round();
    scattering_ = true;
    arrived_ = 0;
    consumed_ = 0;
    cv_.notify_all();
  } else {
    cv_.wait(lock, [&] { return failed_ || (scattering_ && round_ == my_round); });
  }
  check_failed();
  Exchange result;
  result.received = std::move(exchange_results_[rank]);
  result.bytes_sent = sent;
  if (++consumed_ == n_ranks_) {
    scattering_ = false;
    ++round_;
    cv_.notify_all();
  }
  return result;
}

std::vector<ByteBuffer> Fabric::all_gather(int rank, ByteBuffer payload,
                                           const std::string& stage) {
  std::map<int, ByteBuffer> outgoing;
  for (int q = 0; q < n_ranks_; ++q)
    if (q != rank) outgoing.emplace(q, payload);
  Exchange ex = neighbor_exchange(rank, std::move(outgoing), stage);
  std::vector<ByteBuffer> gathered(n_ranks_);
  gathered[rank] = std::move(payload);
  for (auto& [p, bytes] : ex.received) gathered[p] = std::move(bytes);
  return gathered;
}

std::uint64_t Fabric::total_bytes_sent() const {
  std::lock_guard lock(mutex_);
  return total_bytes_;
}

std::vector<Fabric::Delivery> Fabric::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

void Fabric::fail(const std::string& reason) {
  std::lock_guard lock(mutex_);
  if (!failed_) {
    failed_ = true;
    failure_ = reason;
  }
  cv_.notify_all();
}

void run_on_ranks(Fabric& fabric, const std::function<void(int)>& fn) {
  const int n = fabric.n_ranks();
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (int rank = 0; rank < n; ++rank) {
    threads.emplace_back([&, rank] {
      try {
        fn(rank);
      } catch (...) {
        errors[rank] = std::current_exception();
        fabric.fail("rank " + std::to_string(rank) + " aborted");
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int rank = 0; rank < n; ++rank)
    if (errors[rank]) std::rethrow_exception(errors[rank]);
}

}  // namespace hpdist

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_PARTITION_HPP
#define HPDIST_PARTITION_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace hpdist {

/// Cell cost model: a cell with n unknowns costs n^exponent, scaled and
/// rounded to an integer weight of at least one.
struct WeightPolicy {
  double exponent = 1.9;
  std::uint64_t scale = 1;
};

/// max(1, round(scale * n_dofs^exponent)), rounded half away from zero.
/// Monotone non-decreasing in n_dofs.
std::uint64_t cell_weight(std::uint64_t n_dofs, const WeightPolicy& policy = {});

/// Splits the space-filling-curve sequence into contiguous per-rank
/// segments: cell i goes to rank floor(prefix_exclusive(i) * n_ranks / W)
/// where W is the total weight. Assignments are non-decreasing along the
/// curve and ranks may stay empty.
std::vector<int> partition_by_weight(std::span<const std::uint64_t> weights, int n_ranks);

}  // namespace hpdist

#endif

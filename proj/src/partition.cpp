// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/partition.hpp"

#include <cmath>
#include <stdexcept>

namespace hpdist {

std::uint64_t cell_weight(std::uint64_t n_dofs, const WeightPolicy& policy) {
  if (n_dofs == 0) throw std::invalid_argument("cell without unknowns");
  if (policy.exponent <= 0.0) throw std::invalid_argument("weight exponent must be positive");
  const double raw = double(policy.scale) * std::pow(double(n_dofs), policy.exponent);
  const double rounded = std::floor(raw + 0.5);
  if (rounded < 1.0) return 1;
  return static_cast<std::uint64_t>(rounded);
}

std::vector<int> partition_by_weight(std::span<const std::uint64_t> weights, int n_ranks) {
  if (n_ranks < 1) throw std::invalid_argument("at least one rank required");
  std::uint64_t total = 0;
  for (const std::uint64_t w : weights) {
    if (w == 0) throw std::invalid_argument("zero cell weight");
    total += w;
  }
  std::vector<int> owner(weights.size());
  std::uint64_t prefix = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    owner[i] = static_cast<int>((unsigned __int128)(prefix)*n_ranks / total);
    prefix += weights[i];
  }
  return owner;
}

}  // namespace hpdist

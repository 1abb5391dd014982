// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors
//
// Acceptance suite: every criterion prints one pass/fail line and the
// process exits nonzero if any of them fails.

#include <chrono>
#include <cmath>
#include <malloc.h>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "hpdist/cell_data.hpp"
#include "hpdist/constraints.hpp"
#include "hpdist/driver.hpp"
#include "hpdist/partition.hpp"
#include "hpdist/sequential_oracle.hpp"
#include "test_support.hpp"

using namespace hpdist;
using namespace hpdist::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require(bool condition, const std::string& message) {
  if (!condition) throw std::runtime_error(message);
}

const ElementCollection collection = ElementCollection::lagrange_range(1, 12);

std::vector<int> fe_of(const std::vector<int>& degrees) {
  std::vector<int> out(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i)
    out[i] = collection.index_of_degree(degrees[i]);
  return out;
}

std::vector<std::uint64_t> dof_weights(const std::vector<int>& degrees, double exponent) {
  std::vector<std::uint64_t> w(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i)
    w[i] = cell_weight(std::uint64_t(degrees[i] + 1) * (degrees[i] + 1), {exponent, 1});
  return w;
}

// Results of the randomized partition-independence sweep, shared by the
// criteria that assert different aspects of the same runs.
struct SweepData {
  int meshes = 0;
  int runs = 0;
  bool ghost_closure_ok = true;
  bool traffic_bound_ok = true;
  bool savings_ok = true;
  bool identity_empty_ok = true;
  bool constraint_rows_ok = true;
  double elapsed_seconds = 0.0;
};
SweepData sweep;
bool sweep_done = false;

std::string run_sweep() {
  const auto t0 = Clock::now();
  const std::vector<int> rank_counts{1, 2, 3, 5, 8};
  const int n_meshes = 20;

  for (int m = 0; m < n_meshes; ++m) {
    const std::uint32_t seed = 1000 + 17 * m;
    const int rounds = 3 + m % 4;
    const RandomMesh mesh = random_mesh(seed, rounds, 2, 7, 5000);
    const auto fes = fe_of(mesh.degrees);
    const auto oracle = unified_enumerate(mesh.forest, fes, collection);
    const auto naive = naive_enumerate(mesh.forest, fes, collection);

    // savings identity on the sequential pair: the unification events equal
    // the coincidence-class excess, which also equals the naive scheme's
    // identity-constraint count
    const auto classes = classify_nodal_functionals(mesh.forest, fes, collection);
    std::uint64_t excess = 0;
    for (const std::size_t size : classes.class_size) excess += size - 1;
    if (naive.n_dofs - oracle.n_dofs != excess) sweep.savings_ok = false;
    if (identity_constraints(mesh.forest, fes, collection, naive.cell_dofs).size() != excess)
      sweep.savings_ok = false;
    if (!identity_constraints(mesh.forest, fes, collection, oracle.cell_dofs).empty())
      sweep.identity_empty_ok = false;

    const auto weights = dof_weights(mesh.degrees, 1.9);
    std::vector<std::string> reference_constraints;
    for (const int n_ranks : rank_counts) {
      const auto owner = partition_by_weight(weights, n_ranks);
      const auto outcomes =
          enumerate_parallel(mesh.forest, owner, mesh.degrees, collection, n_ranks);
      ++sweep.runs;

      require(outcomes[0].enumeration.cache.n_global == oracle.n_dofs,
              "N differs from the sequential oracle");
      std::uint64_t first_bytes = 0, second_bytes = 0;
      for (const auto& outcome : outcomes) {
        require(outcome.enumeration.cache.n_global == oracle.n_dofs,
                "N differs between ranks");
        first_bytes += outcome.enumeration.stats.first_exchange_bytes;
        second_bytes += outcome.enumeration.stats.second_exchange_bytes;
        outcome.enumeration.store.for_each_array([&](std::span<const DofIndex> arr) {
          for (const DofIndex d : arr)
            if (d == kInvalidDof) sweep.ghost_closure_ok = false;
        });
      }
      if (second_bytes > first_bytes) sweep.traffic_bound_ok = false;

      // gather, merge, and close the constraint set, then compare its
      // entity-anchored rendering across rank counts
      std::unordered_map<DofIndex, std::string> labels;
      std::map<DofIndex, Constraint> merged;
      for (const auto& outcome : outcomes) {
        for (auto& [dof, label] : dof_anchor_labels(outcome.enumeration.store, collection))
          labels.emplace(dof, label);
        const auto classified = build_interface_constraints(
            outcome.view, outcome.active_fe, outcome.enumeration.store, collection);
        for (const auto& cc : classified) {
          if (!(cc.constraint.row_sum() == Rational(1))) sweep.constraint_rows_ok = false;
          const auto [it, inserted] = merged.emplace(cc.constraint.dof, cc.constraint);
          if (!inserted && !(it->second.entries == cc.constraint.entries))
            throw std::runtime_error("ranks disagree on a shared constraint");
        }
      }
      std::vector<Constraint> all;
      all.reserve(merged.size());
      for (const auto& [dof, c] : merged) all.push_back(c);
      const auto closed = close(std::move(all));
      std::set<DofIndex> dependents;
      for (const auto& c : closed) dependents.insert(c.dof);
      for (const auto& c : closed) {
        if (!(c.row_sum() == Rational(1))) sweep.constraint_rows_ok = false;
        for (const auto& [master, coeff] : c.entries)
          if (dependents.count(master)) sweep.constraint_rows_ok = false;
      }
      const auto rendered = render_anchored(closed, labels);
      if (n_ranks == rank_counts.front())
        reference_constraints = rendered;
      else
        require(rendered == reference_constraints,
                "closed constraint set differs between rank counts");
    }
    ++sweep.meshes;
  }
  sweep.elapsed_seconds = seconds_since(t0);
  sweep_done = true;
  require(sweep.elapsed_seconds < 60.0, "sweep exceeded the 60 s budget");

  std::ostringstream os;
  os << sweep.meshes << " meshes x " << rank_counts.size() << " rank counts in "
     << int(sweep.elapsed_seconds * 1000) << " ms, all N equal to the oracle, "
     << "closed constraint sets identical";
  return os.str();
}

void ensure_sweep() {
  if (!sweep_done) run_sweep();
}

std::string criterion_fig1() {
  const auto t0 = Clock::now();
  const Forest forest = fig1_forest();
  const auto fes = fe_of(fig1_degrees());
  const auto naive = naive_enumerate(forest, fes, collection);
  require(naive.n_dofs == 34, "naive count is not 34");
  const auto unified = unified_enumerate(forest, fes, collection);
  require(unified.n_dofs == 31, "unified count is not 31");

  const std::vector<int> owner{0, 0};
  const auto outcomes = enumerate_parallel(forest, owner, fig1_degrees(), collection, 1);
  require(outcomes[0].enumeration.cache.n_global == 31, "enumeration count is not 31");

  const auto classified = build_interface_constraints(
      outcomes[0].view, outcomes[0].active_fe, outcomes[0].enumeration.store, collection);
  require(classified.size() == 2, "expected exactly two interface constraints");
  using Entries = std::vector<std::pair<DofIndex, Rational>>;
  const Entries first{{1, Rational(3, 8)}, {3, Rational(-1, 8)}, {5, Rational(3, 4)}};
  const Entries second{{1, Rational(-1, 8)}, {3, Rational(3, 8)}, {5, Rational(3, 4)}};
  require(classified[0].constraint.entries == first, "first constraint coefficients wrong");
  require(classified[1].constraint.entries == second, "second constraint coefficients wrong");
  const double dt = seconds_since(t0);
  require(dt < 1.0, "exceeded the 1 s budget");
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "N_naive=34 N=31, coefficients (3/8,-1/8,3/4) and (-1/8,3/8,3/4), %.0f ms",
                dt * 1000);
  return buf;
}

std::string criterion_fig2() {
  const auto t0 = Clock::now();
  const Forest forest = fig2_forest();
  const std::vector<int> owner{0, 0, 1, 1};
  const auto outcomes = enumerate_parallel(forest, owner, fig2_degrees(), collection, 2);
  for (const auto& outcome : outcomes) {
    const NumberCache& cache = outcome.enumeration.cache;
    require(cache.n_global == 57, "N is not 57");
    require(cache.n_per_rank == std::vector<DofIndex>{29, 28}, "per-rank counts are not 29/28");
    outcome.enumeration.store.for_each_array([](std::span<const DofIndex> arr) {
      for (const DofIndex d : arr)
        if (d == kInvalidDof) throw std::runtime_error("invalid index survived the exchange");
    });
  }
  require(outcomes[0].enumeration.cache.owned_begin == 0 &&
              outcomes[0].enumeration.cache.owned_end == 29,
          "rank 0 range is not [0,29)");
  require(outcomes[1].enumeration.cache.owned_begin == 29 &&
              outcomes[1].enumeration.cache.owned_end == 57,
          "rank 1 range is not [29,57)");
  const double dt = seconds_since(t0);
  require(dt < 1.0, "exceeded the 1 s budget");
  char buf[120];
  std::snprintf(buf, sizeof buf, "N=57, n=(29,28), ranges [0,29)+[29,57), %.0f ms", dt * 1000);
  return buf;
}

std::string criterion_partition_independence() {
  return run_sweep();
}

std::string criterion_ghost_closure() {
  ensure_sweep();
  require(sweep.ghost_closure_ok, "an invalid index survived the second exchange");
  require(sweep.traffic_bound_ok, "second exchange moved more bytes than the first");
  return "no invalid indices after the second exchange; its traffic never exceeded the first";
}

std::string criterion_savings() {
  ensure_sweep();
  require(sweep.savings_ok, "naive minus unified does not match the coincidence excess");
  require(sweep.identity_empty_ok, "identity constraints found on a unified enumeration");
  return "N_naive - N equals the coincidence excess; unified identity set empty";
}

std::string criterion_constraint_exactness() {
  ensure_sweep();
  require(sweep.constraint_rows_ok, "row sums or closure invariants violated");
  return "all rows sum to 1 exactly; closure leaves no dependent DoF as a master";
}

std::string criterion_balance() {
  int checks = 0;
  for (const std::uint32_t seed : {2001u, 2002u, 2003u, 2004u}) {
    const RandomMesh mesh = random_mesh(seed, 4, 2, 7, 4000);
    for (const double c : {1.0, 1.9, 3.0}) {
      const auto weights = dof_weights(mesh.degrees, c);
      std::uint64_t total = 0, heaviest = 0;
      for (const std::uint64_t w : weights) {
        total += w;
        heaviest = std::max(heaviest, w);
      }
      for (const int n_ranks : {2, 4, 8}) {
        const auto owner = partition_by_weight(weights, n_ranks);
        std::vector<std::uint64_t> per_rank(n_ranks, 0);
        for (std::size_t i = 0; i < weights.size(); ++i) per_rank[owner[i]] += weights[i];
        for (const std::uint64_t sum : per_rank)
          require(double(sum) <= double(total) / n_ranks + double(heaviest),
                  "per-rank weight exceeds W/P + max cell weight");
        ++checks;
      }
    }
  }
  return std::to_string(checks) + " (mesh, exponent, rank-count) combinations within the bound";
}

std::string criterion_transfer() {
  // pack -> unpack identity
  const RandomMesh mesh = random_mesh(3001, 3, 2, 6, 800);
  const auto payload_of = [&](const CellKey& cell) {
    ByteBuffer out;
    append_u64(out, cell.morton());
    append_u8(out, cell.level);
    return out;
  };
  const auto packed = pack(mesh.forest.leaves(), payload_of);
  for (std::size_t j = 0; j < packed.cells.size(); ++j) {
    const auto got = packed.payload(j);
    require(ByteBuffer(got.begin(), got.end()) == payload_of(packed.cells[j]),
            "pack/unpack mismatch");
  }

  // repartition conserves the multiset
  {
    const auto weights = dof_weights(mesh.degrees, 1.9);
    const auto old_owner = partition_by_weight(weights, 3);
    std::vector<std::uint64_t> flipped(weights.rbegin(), weights.rend());
    const auto new_owner = partition_by_weight(flipped, 3);
    Fabric fabric(3);
    std::vector<TransferResult> results(3);
    run_on_ranks(fabric, [&](int rank) {
      std::vector<CellKey> cells;
      for (std::size_t i = 0; i < mesh.forest.n_leaves(); ++i)
        if (old_owner[i] == rank) cells.push_back(mesh.forest.leaves()[i]);
      const auto sorted = sort_for_transfer(pack(cells, payload_of), [&](const CellKey& cell) {
        return new_owner[mesh.forest.index_of(cell)];
      });
      results[rank] = repartition_transfer(mesh.forest.leaves(), old_owner, new_owner, sorted,
                                           rank, fabric);
    });
    std::size_t received = 0;
    for (int rank = 0; rank < 3; ++rank) {
      for (std::size_t j = 0; j < results[rank].received.cells.size(); ++j) {
        const CellKey& cell = results[rank].received.cells[j];
        require(new_owner[mesh.forest.index_of(cell)] == rank, "cell landed on the wrong rank");
        const auto got = results[rank].received.payload(j);
        require(ByteBuffer(got.begin(), got.end()) == payload_of(cell),
                "payload changed in flight");
        ++received;
      }
    }
    require(received == mesh.forest.n_leaves(), "payload multiset not conserved");
  }

  // checkpoint round trip, byte-identical
  const auto dir = std::filesystem::temp_directory_path() / "hpdist_acceptance_ckpt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto path = (dir / "state.hpdk").string();
  checkpoint_save(path, packed);
  require(checkpoint_load(path) == packed, "checkpoint round trip differs");

  // restart with a different rank count reproduces the next cycle's N
  const std::string prefix = (dir / "driver").string();
  DriverConfig first;
  first.ranks = 3;
  first.cycles = 2;
  first.initial_refines = 1;
  first.checkpoint_prefix = prefix;
  run_driver(first);
  DriverConfig straight = first;
  straight.checkpoint_prefix.clear();
  straight.cycles = 3;
  const auto reference = run_driver(straight);
  DriverConfig resumed;
  resumed.ranks = 5;
  resumed.cycles = 1;
  resumed.restart_prefix = prefix;
  const auto after = run_driver(resumed);
  require(after.metrics.size() == 1 && after.metrics[0].cycle == 3,
          "restart did not continue at the next cycle");
  require(after.metrics[0].dofs == reference.metrics[3].dofs,
          "restart on a different rank count changed N");
  std::filesystem::remove_all(dir);
  return "pack/unpack identity, conserved repartition, byte-exact checkpoint, restart N match";
}

std::string criterion_linear_complexity() {
  // Grow a mesh through three cell-count doublings (refining the leading
  // third of the curve doubles the count without balance cascades) and time
  // the enumeration itself. Sizes start beyond the cache-resident regime so
  // the ratios measure algorithmic growth; rounds are interleaved and the
  // median per size sheds scheduler noise. Large freed blocks stay on the
  // heap so later rounds do not re-fault their pages.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, -1);
  std::vector<Forest> forests;
  {
    Forest forest = Forest(TreeLayout::l_shape()).refined_uniformly(6);
    for (int step = 0; step < 5; ++step) {
      std::vector<AdaptFlag> flags(forest.n_leaves(), AdaptFlag::keep);
      for (std::size_t i = 0; i < flags.size() / 3; ++i) flags[i] = AdaptFlag::refine;
      forest = forest.refine_and_coarsen(flags).forest;
      if (step >= 1) forests.push_back(forest);
    }
  }

  std::vector<std::vector<int>> degrees_of(forests.size());
  for (std::size_t s = 0; s < forests.size(); ++s) {
    const Forest& forest = forests[s];
    auto& degrees = degrees_of[s];
    degrees.resize(forest.n_leaves());
    for (std::size_t i = 0; i < degrees.size(); ++i) degrees[i] = 2 + int(i % 3);
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t i = 0; i < forest.n_leaves(); ++i)
        for (int side = 0; side < 4; ++side) {
          const auto n = forest.side_neighbors(i, side);
          for (int k = 0; k < n.count; ++k)
            if (degrees[i] < degrees[n.index[k]] - 1) {
              degrees[i] = degrees[n.index[k]] - 1;
              changed = true;
            }
        }
    }
  }

  std::vector<std::vector<double>> samples(forests.size());
  const int n_rounds = 5;
  for (int round = -1; round < n_rounds; ++round) {  // round -1 warms up
    for (std::size_t s = 0; s < forests.size(); ++s) {
      const Forest& forest = forests[s];
      const std::vector<int> owner(forest.n_leaves(), 0);
      Fabric fabric(1);
      run_on_ranks(fabric, [&](int rank) {
        LocalView view(forest, owner, rank, 1);
        ActiveFeMap owned;
        for (const CellKey& cell : view.owned())
          owned.emplace(cell,
                        collection.index_of_degree(degrees_of[s][forest.index_of(cell)]));
        const auto afe = exchange_active_fe_indices(view, owned, fabric);
        const auto t0 = Clock::now();
        distribute_dofs(view, afe, collection, fabric);
        if (round >= 0) samples[s].push_back(seconds_since(t0));
      });
    }
  }
  std::vector<double> typical(forests.size());
  for (std::size_t s = 0; s < forests.size(); ++s) {
    std::sort(samples[s].begin(), samples[s].end());
    typical[s] = samples[s][samples[s].size() / 2];  // median sheds outliers both ways
  }

  std::ostringstream os;
  os << "cells/enumeration seconds:";
  for (std::size_t s = 0; s < forests.size(); ++s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " %zu/%.3f", forests[s].n_leaves(), typical[s]);
    os << buf;
  }
  // Growth per doubling over the measured doublings; individual steps may
  // cross one cache-capacity cliff, so they get a looser hard cap.
  const double per_doubling =
      std::pow(typical.back() / std::max(typical.front(), 1e-3), 1.0 / double(typical.size() - 1));
  {
    char buf[48];
    std::snprintf(buf, sizeof buf, "; growth/doubling %.2fx", per_doubling);
    os << buf;
  }
  // quadratic growth would show ~4x on every step; allow one step some
  // slack for memory-system jitter around the capacity boundaries
  for (std::size_t s = 1; s < typical.size(); ++s) {
    const double ratio = typical[s] / std::max(typical[s - 1], 1e-3);
    require(ratio <= 3.5, "one doubling step blew past linear growth: " + os.str());
  }
  require(per_doubling <= 2.5,
          "enumeration time grew by more than 2.5x per doubling: " + os.str());
  return os.str();
}

std::string criterion_substitutes() {
  // the large-machine scaling studies, the timing-derived optimal exponents,
  // and solver behavior are not reproducible at desk scale; criteria 3-9
  // stand in for them, and the driver applies c = 1.9 as its default
  DriverConfig config;
  require(config.exponent == 1.9, "default weighting exponent is not 1.9");
  return "desk-scale substitutes active; driver default exponent c = 1.9";
}

struct Criterion {
  int id;
  std::string name;
  std::function<std::string()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "two-cell golden enumeration and constraints", criterion_fig1},
      {2, "four-cell golden parallel enumeration", criterion_fig2},
      {3, "partition independence over randomized forests", criterion_partition_independence},
      {4, "ghost closure in two exchange rounds", criterion_ghost_closure},
      {5, "unification savings identity", criterion_savings},
      {6, "constraint exactness and closure", criterion_constraint_exactness},
      {7, "weighted partition balance bound", criterion_balance},
      {8, "transfer and checkpoint round trips", criterion_transfer},
      {9, "near-linear enumeration cost", criterion_linear_complexity},
      {10, "desk-scale substitutes for the cluster studies", criterion_substitutes},
  };

  bool all_passed = true;
  for (const Criterion& criterion : criteria) {
    try {
      const std::string detail = criterion.run();
      std::printf("[PASS] criterion %2d: %s — %s\n", criterion.id, criterion.name.c_str(),
                  detail.c_str());
    } catch (const std::exception& e) {
      all_passed = false;
      std::printf("[FAIL] criterion %2d: %s — %s\n", criterion.id, criterion.name.c_str(),
                  e.what());
    }
    std::fflush(stdout);
  }
  return all_passed ? 0 : 1;
}

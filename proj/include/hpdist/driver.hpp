// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#ifndef HPDIST_DRIVER_HPP
#define HPDIST_DRIVER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hpdist/constraints.hpp"
#include "hpdist/dof_enumerator.hpp"
#include "hpdist/forest.hpp"
#include "hpdist/local_view.hpp"

namespace hpdist {

/// The reentrant-corner solution r^(2/3) sin(2/3 theta) drives the analytic
/// refinement indicator: its gradient magnitude is radially symmetric,
/// (2/3) r^(-1/3), blowing up at the corner. The angle is measured from the
/// reentrant edge on the positive x axis, counterclockwise through the
/// domain, so the solution vanishes on both reentrant edges.
struct CornerSingularity {
  double alpha = 2.0 / 3.0;

  /// u(x, y) in coordinates centered on the corner.
  double value(double x, double y) const;

  double gradient_magnitude(double r) const;

  /// eta(K) = h_K * sup over the cell corners of |grad u| = h_K * alpha *
  /// r_min^(alpha-1); cells touching the corner rank as infinite.
  double indicator(double h, double r_min) const;
};

enum class CellAction : std::uint8_t { keep, refine_h, refine_p, coarsen_h, coarsen_p };

struct MarkInput {
  CellKey cell;
  int degree = 0;
  double eta = 0.0;
  double r_min = 0.0;
};

struct MarkFractions {
  double refine = 0.30;
  double coarsen = 0.03;
  double p_adapt = 0.90;
};

/// Fixed-fraction marking over the globally sorted indicators: the top
/// refine-fraction of cells is refined, the bottom coarsen-fraction
/// coarsened (fractions floor to counts). Within each marked set the cells
/// closest to the singularity (smallest 1 - p_adapt fraction by r_min) are
/// h-adapted, the rest p-adapted; p marks at the boundary of the degree
/// range convert to h marks. Ties break by cell key.
std::vector<CellAction> mark_and_decide(std::vector<MarkInput> cells,
                                        const MarkFractions& fractions, int degree_min,
                                        int degree_max);

/// Iterated relaxation that only raises degrees until every pair of
/// edge-neighboring cells differs by at most one; ghost degrees are
/// re-exchanged each round. Returns the smoothed degrees on all relevant
/// cells. Collective.
std::unordered_map<CellKey, int, CellKeyHash> smooth_degrees(
    const LocalView& view, const std::unordered_map<CellKey, int, CellKeyHash>& owned_degrees,
    int degree_max, Fabric& fabric);

struct DriverConfig {
  int ranks = 1;
  int cycles = 3;
  int initial_refines = 3;
  double exponent = 1.9;
  int degree_min = 2;
  int degree_max = 7;
  double refine_fraction = 0.30;
  double coarsen_fraction = 0.03;
  double p_fraction = 0.90;
  std::string output_dir;         ///< empty: no files written
  std::string checkpoint_prefix;  ///< write per-rank shards after the last cycle
  std::string restart_prefix;     ///< resume from shards written earlier
  bool dump_mesh = false;
  std::string fixture;  ///< "", "fig1", or "fig2"
};

struct CycleMetrics {
  int cycle = 0;
  std::uint64_t cells = 0;
  std::uint64_t dofs = 0;
  std::uint64_t min_rank_dofs = 0;
  std::uint64_t max_rank_dofs = 0;
  double weight_imbalance = 1.0;
  std::uint64_t hp_constraints = 0;
  std::uint64_t hanging_constraints = 0;
  std::uint64_t identity_constraints = 0;
  std::uint64_t repartition_bytes = 0;
  double t_enumerate_ms = 0.0;
  double t_adapt_ms = 0.0;
  double t_partition_ms = 0.0;
};

struct DriverResult {
  std::vector<CycleMetrics> metrics;
  std::string metrics_csv;
};

/// Header line of the metrics table.
std::string metrics_csv_header();
std::string metrics_csv_row(const CycleMetrics& m);

/// Runs the full adaptation loop on the simulated fabric: indicate, mark,
/// adapt, smooth degrees, repartition by weight, transfer cell data,
/// enumerate, build constraints, record metrics. Writes metrics (and
/// optional mesh/constraint dumps and checkpoints) under the configured
/// output directory.
DriverResult run_driver(const DriverConfig& config);

}  // namespace hpdist

#endif

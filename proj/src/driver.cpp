// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include "hpdist/driver.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hpdist/cell_data.hpp"
#include "hpdist/partition.hpp"

namespace hpdist {

double CornerSingularity::value(double x, double y) const {
  const double r = std::hypot(x, y);
  if (r == 0.0) return 0.0;
  double theta = std::atan2(y, x);
  if (theta < 0.0) theta += 2.0 * M_PI;  // [0, 3*pi/2] covers the domain
  return std::pow(r, alpha) * std::sin(alpha * theta);
}

double CornerSingularity::gradient_magnitude(double r) const {
  return alpha * std::pow(r, alpha - 1.0);
}

double CornerSingularity::indicator(double h, double r_min) const {
  if (r_min <= 0.0) return std::numeric_limits<double>::infinity();
  return h * gradient_magnitude(r_min);
}

std::vector<CellAction> mark_and_decide(std::vector<MarkInput> cells,
                                        const MarkFractions& fractions, int degree_min,
                                        int degree_max) {
  const std::size_t n = cells.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  const auto eta_desc = [&](std::size_t a, std::size_t b) {
    if (cells[a].eta != cells[b].eta) return cells[a].eta > cells[b].eta;
    return cells[a].cell < cells[b].cell;
  };
  std::sort(order.begin(), order.end(), eta_desc);

  const auto n_refine = static_cast<std::size_t>(fractions.refine * double(n));
  const auto n_coarsen = static_cast<std::size_t>(fractions.coarsen * double(n));

  std::vector<std::size_t> refine_set(order.begin(), order.begin() + n_refine);
  std::vector<std::size_t> coarsen_set;
  for (std::size_t k = n; k-- > 0 && coarsen_set.size() < n_coarsen;) {
    if (k < n_refine) break;  // never coarsen a refine-marked cell
    coarsen_set.push_back(order[k]);
  }

  std::vector<CellAction> actions(n, CellAction::keep);
  const auto apply = [&](std::vector<std::size_t>& set, bool refining) {
    std::sort(set.begin(), set.end(), [&](std::size_t a, std::size_t b) {
      if (cells[a].r_min != cells[b].r_min) return cells[a].r_min < cells[b].r_min;
      return cells[a].cell < cells[b].cell;
    });
    const auto n_p = static_cast<std::size_t>(fractions.p_adapt * double(set.size()));
    const std::size_t n_h = set.size() - n_p;
    for (std::size_t k = 0; k < set.size(); ++k) {
      const std::size_t i = set[k];
      bool h_adapt = k < n_h;
      if (!h_adapt) {
        // p marks at the end of the degree range convert to h marks
        if (refining && cells[i].degree >= degree_max) h_adapt = true;
        if (!refining && cells[i].degree <= degree_min) h_adapt = true;
      }
      if (refining)
        actions[i] = h_adapt ? CellAction::refine_h : CellAction::refine_p;
      else
        actions[i] = h_adapt ? CellAction::coarsen_h : CellAction::coarsen_p;
    }
  };
  apply(refine_set, true);
  apply(coarsen_set, false);
  return actions;
}

std::unordered_map<CellKey, int, CellKeyHash> smooth_degrees(
    const LocalView& view, const std::unordered_map<CellKey, int, CellKeyHash>& owned_degrees,
    int degree_max, Fabric& fabric) {
  std::unordered_map<CellKey, int, CellKeyHash> mine = owned_degrees;
  for (;;) {
    const auto all = exchange_active_fe_indices(view, mine, fabric);
    bool changed = false;
    for (const CellKey& cell : view.owned()) {
      int& degree = mine.at(cell);
      for (int side = 0; side < 4; ++side) {
        const auto rel = view.side_relation(cell, side);
        for (int k = 0; k < rel.count; ++k) {
          const int target = std::min(all.at(rel.cells[k]) - 1, degree_max);
          if (degree < target) {
            degree = target;
            changed = true;
          }
        }
      }
    }
    ByteBuffer flag{static_cast<std::uint8_t>(changed ? 1 : 0)};
    const auto gathered = fabric.all_gather(view.rank(), std::move(flag), "degree-smoothing");
    const bool any = std::any_of(gathered.begin(), gathered.end(),
                                 [](const ByteBuffer& b) { return !b.empty() && b[0] != 0; });
    if (!any) return all;
  }
}

std::string metrics_csv_header() {
  return "cycle,cells,dofs,min_rank_dofs,max_rank_dofs,weight_imbalance,hp_constraints,"
         "hanging_constraints,identity_constraints,repartition_bytes,t_enumerate_ms,t_adapt_ms,"
         "t_partition_ms";
}

std::string metrics_csv_row(const CycleMetrics& m) {
  char buf[64];
  std::ostringstream os;
  os << m.cycle << ',' << m.cells << ',' << m.dofs << ',' << m.min_rank_dofs << ','
     << m.max_rank_dofs << ',';
  std::snprintf(buf, sizeof buf, "%.6f", m.weight_imbalance);
  os << buf << ',' << m.hp_constraints << ',' << m.hanging_constraints << ','
     << m.identity_constraints << ',' << m.repartition_bytes << ',';
  std::snprintf(buf, sizeof buf, "%.3f", m.t_enumerate_ms);
  os << buf << ',';
  std::snprintf(buf, sizeof buf, "%.3f", m.t_adapt_ms);
  os << buf << ',';
  std::snprintf(buf, sizeof buf, "%.3f", m.t_partition_ms);
  os << buf;
  return os.str();
}

namespace {

using DegreeMap = std::unordered_map<CellKey, int, CellKeyHash>;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

TreeLayout layout_for_domain(const std::string& domain) {
  if (domain == "lshape") return TreeLayout::l_shape();
  if (domain == "fig1") return TreeLayout::two_cells();
  if (domain == "fig2") return TreeLayout::unit_square();
  throw std::invalid_argument("unknown domain: " + domain);
}

std::pair<std::uint64_t, std::uint64_t> singular_corner(const std::string& domain) {
  constexpr std::uint64_t side = 1ull << kMaxLevel;
  if (domain == "lshape") return {side, side};  // the reentrant corner
  return {0, 0};
}

struct CellGeometry {
  double h = 0.0;      // physical cell size (tree side = 1)
  double r_min = 0.0;  // physical distance of the nearest corner to the singular point
};

CellGeometry cell_geometry(const Forest& forest, const CellKey& cell,
                           std::pair<std::uint64_t, std::uint64_t> corner) {
  constexpr double scale = double(1ull << kMaxLevel);
  const auto [gx, gy] = forest.global_anchor(cell);
  const std::uint64_t h = cell.extent();
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 4; ++c) {
    const std::uint64_t vx = gx + ((c & 1) ? h : 0);
    const std::uint64_t vy = gy + ((c & 2) ? h : 0);
    const double dx = double(vx) - double(corner.first);
    const double dy = double(vy) - double(corner.second);
    best = std::min(best, dx * dx + dy * dy);
  }
  return {double(h) / scale, std::sqrt(best) / scale};
}

void append_f64(ByteBuffer& buf, double v) { append_u64(buf, std::bit_cast<std::uint64_t>(v)); }
double read_f64(ByteReader& r) { return std::bit_cast<double>(r.read_u64()); }

void encode_constraint(ByteBuffer& buf, const ClassifiedConstraint& cc) {
  append_u64(buf, cc.constraint.dof);
  append_u8(buf, static_cast<std::uint8_t>(cc.kind));
  append_u32(buf, static_cast<std::uint32_t>(cc.constraint.entries.size()));
  for (const auto& [m, c] : cc.constraint.entries) {
    append_u64(buf, m);
    append_u64(buf, static_cast<std::uint64_t>(c.num()));
    append_u64(buf, static_cast<std::uint64_t>(c.den()));
  }
}

ClassifiedConstraint decode_constraint(ByteReader& r) {
  ClassifiedConstraint cc;
  cc.constraint.dof = r.read_u64();
  cc.kind = static_cast<ConstraintKind>(r.read_u8());
  const std::uint32_t n = r.read_u32();
  cc.constraint.entries.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const DofIndex m = r.read_u64();
    const auto num = static_cast<std::int64_t>(r.read_u64());
    const auto den = static_cast<std::int64_t>(r.read_u64());
    cc.constraint.entries.emplace_back(m, Rational(num, den));
  }
  return cc;
}

/// Coincident same-entity nodal positions whose stored indices disagree;
/// empty after a unified enumeration. Rendered entity-anchored so ranks can
/// be merged.
std::vector<std::string> local_identity_violations(const EntityDofStore& store,
                                                   const ElementCollection& collection) {
  std::vector<std::string> out;
  store.for_each_vertex([&](const VertexKey& v, EntityDofStore::ConstArraysRef arrays) {
    std::set<DofIndex> distinct;
    for (int i = 0; i < arrays.size(); ++i) distinct.insert(arrays.dofs(i)[0]);
    if (distinct.size() > 1)
      out.push_back("v:" + std::to_string(v.x) + "," + std::to_string(v.y) + ":" +
                    std::to_string(distinct.size()));
  });
  store.for_each_edge([&](const EdgeKey& e, EntityDofStore::ConstArraysRef arrays) {
    std::map<Rational, std::set<DofIndex>> groups;
    for (int i = 0; i < arrays.size(); ++i) {
      const auto points = collection[arrays.fe(i)].edge_support_points();
      const auto dofs = arrays.dofs(i);
      for (std::size_t j = 0; j < dofs.size(); ++j) groups[points[j]].insert(dofs[j]);
    }
    for (const auto& [x, distinct] : groups) {
      if (distinct.size() > 1)
        out.push_back("e:" + std::to_string(e.x) + "," + std::to_string(e.y) + "," +
                      std::to_string(e.axis) + "," + std::to_string(e.extent) + "@" + x.str() +
                      ":" + std::to_string(distinct.size()));
    }
  });
  std::sort(out.begin(), out.end());
  return out;
}

struct InitialState {
  std::string domain;
  Forest forest;
  std::vector<int> degrees;  // per leaf
  int start_cycle = 0;
  bool adapt_first = false;  // restarted runs adapt before their first row
};

InitialState make_initial_state(const DriverConfig& config) {
  if (!config.restart_prefix.empty()) {
    std::ifstream meta_in(config.restart_prefix + ".meta.json");
    if (!meta_in) throw std::runtime_error("cannot open checkpoint metadata");
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    const std::string domain = meta.at("domain").get<std::string>();
    const int saved_ranks = meta.at("ranks").get<int>();
    const int saved_cycle = meta.at("cycle").get<int>();

    std::vector<std::pair<CellKey, int>> cells;
    for (int p = 0; p < saved_ranks; ++p) {
      const PackedCellData shard =
          checkpoint_load(checkpoint_shard_path(config.restart_prefix, p));
      for (std::size_t j = 0; j < shard.cells.size(); ++j) {
        const auto payload = shard.payload(j);
        ByteReader r(payload.data(), payload.size());
        cells.emplace_back(shard.cells[j], static_cast<int>(r.read_u32()));
      }
    }
    std::sort(cells.begin(), cells.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<CellKey> leaves;
    std::vector<int> degrees;
    leaves.reserve(cells.size());
    degrees.reserve(cells.size());
    for (const auto& [cell, degree] : cells) {
      leaves.push_back(cell);
      degrees.push_back(degree);
    }
    Forest forest = Forest::from_leaves(layout_for_domain(domain), std::move(leaves));
    return InitialState{domain, std::move(forest), std::move(degrees), saved_cycle + 1, true};
  }

  if (config.fixture == "fig1") {
    Forest forest(TreeLayout::two_cells());
    return InitialState{"fig1", std::move(forest), {2, 4}, 0, false};
  }
  if (config.fixture == "fig2") {
    Forest forest = Forest(TreeLayout::unit_square()).refined_uniformly(1);
    return InitialState{"fig2", std::move(forest), {2, 4, 4, 2}, 0, false};
  }
  if (!config.fixture.empty()) throw std::invalid_argument("unknown fixture: " + config.fixture);

  Forest forest = Forest(TreeLayout::l_shape()).refined_uniformly(config.initial_refines);
  std::vector<int> degrees(forest.n_leaves(), config.degree_min);
  return InitialState{"lshape", std::move(forest), std::move(degrees), 0, false};
}

}  // namespace

DriverResult run_driver(const DriverConfig& config) {
  if (config.ranks < 1) throw std::invalid_argument("at least one rank required");
  if (config.cycles < 0) throw std::invalid_argument("negative cycle count");
  if (config.degree_min < 1 || config.degree_max > 12 || config.degree_min > config.degree_max)
    throw std::invalid_argument("degree range must lie within 1..12");
  for (const double f :
       {config.refine_fraction, config.coarsen_fraction, config.p_fraction})
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("fractions must lie in [0,1]");

  const InitialState initial = make_initial_state(config);
  const ElementCollection collection =
      ElementCollection::lagrange_range(config.degree_min, config.degree_max);
  for (const int d : initial.degrees)
    if (collection.index_of_degree(d) < 0)
      throw std::invalid_argument("initial degree outside the element collection");

  const auto corner = singular_corner(initial.domain);
  const int n_ranks = config.ranks;
  const MarkFractions fractions{config.refine_fraction, config.coarsen_fraction,
                                config.p_fraction};
  const WeightPolicy weight_policy{config.exponent, 1};

  const int n_rows = initial.adapt_first ? config.cycles : config.cycles + 1;
  std::vector<CycleMetrics> metrics(n_rows);
  std::vector<std::string> constraint_dumps(n_rows);
  std::vector<std::string> mesh_dumps(n_rows);

  if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);

  Fabric fabric(n_ranks);
  run_on_ranks(fabric, [&](int rank) {
    // Replicated global state: every rank derives the identical forest,
    // owners, and degrees from gathered data; per-cell payloads move through
    // the fabric and are checked against the replicas.
    Forest forest = initial.forest;
    std::vector<int> degrees_global = initial.degrees;
    std::vector<int> owner;
    DegreeMap my_degrees;

    const auto weights_of = [&](const std::vector<int>& degs) {
      std::vector<std::uint64_t> w(degs.size());
      for (std::size_t i = 0; i < degs.size(); ++i) {
        const std::uint64_t n_dofs = std::uint64_t(degs[i] + 1) * std::uint64_t(degs[i] + 1);
        w[i] = cell_weight(n_dofs, weight_policy);
      }
      return w;
    };
    const auto imbalance_of = [&](const std::vector<std::uint64_t>& weights) {
      std::vector<std::uint64_t> per_rank(n_ranks, 0);
      std::uint64_t total = 0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        per_rank[owner[i]] += weights[i];
        total += weights[i];
      }
      const std::uint64_t heaviest = *std::max_element(per_rank.begin(), per_rank.end());
      return double(heaviest) / (double(total) / double(n_ranks));
    };
    const auto adopt_partition = [&](const std::vector<int>& new_owner) {
      owner = new_owner;
      my_degrees.clear();
      for (std::size_t i = 0; i < forest.n_leaves(); ++i)
        if (owner[i] == rank) my_degrees.emplace(forest.leaves()[i], degrees_global[i]);
    };

    adopt_partition(partition_by_weight(weights_of(degrees_global), n_ranks));

    for (int row = 0; row < n_rows; ++row) {
      CycleMetrics m;
      m.cycle = initial.start_cycle + row;
      const bool adapt = initial.adapt_first || row > 0;
      std::vector<std::uint64_t> weights;

      if (adapt) {
        const auto t_adapt = Clock::now();
        {
          // Gather (cell, degree, indicator, corner distance) of owned cells
          // so every rank marks the identical global list.
          LocalView view(forest, owner, rank, n_ranks);
          ByteBuffer mine;
          const CornerSingularity singularity;
          for (const CellKey& cell : view.owned()) {
            const CellGeometry geo = cell_geometry(forest, cell, corner);
            append_cell_key(mine, cell);
            append_u32(mine, static_cast<std::uint32_t>(my_degrees.at(cell)));
            append_f64(mine, singularity.indicator(geo.h, geo.r_min));
            append_f64(mine, geo.r_min);
          }
          const auto gathered = fabric.all_gather(rank, std::move(mine), "indicator-gather");

          std::unordered_map<CellKey, MarkInput, CellKeyHash> by_cell;
          for (const ByteBuffer& buf : gathered) {
            ByteReader r(buf);
            while (!r.done()) {
              MarkInput in;
              in.cell = read_cell_key(r);
              in.degree = static_cast<int>(r.read_u32());
              in.eta = read_f64(r);
              in.r_min = read_f64(r);
              by_cell.emplace(in.cell, in);
            }
          }
          std::vector<MarkInput> marks;
          marks.reserve(forest.n_leaves());
          for (const CellKey& cell : forest.leaves()) marks.push_back(by_cell.at(cell));

          const auto actions = mark_and_decide(marks, fractions, config.degree_min,
                                               config.degree_max);

          std::vector<AdaptFlag> flags(actions.size(), AdaptFlag::keep);
          std::vector<int> adjusted(actions.size());
          for (std::size_t i = 0; i < actions.size(); ++i) {
            adjusted[i] = marks[i].degree;
            switch (actions[i]) {
              case CellAction::refine_h:
                flags[i] = AdaptFlag::refine;
                break;
              case CellAction::coarsen_h:
                flags[i] = AdaptFlag::coarsen;
                break;
              case CellAction::refine_p:
                adjusted[i] = std::min(marks[i].degree + 1, config.degree_max);
                break;
              case CellAction::coarsen_p:
                adjusted[i] = std::max(marks[i].degree - 1, config.degree_min);
                break;
              case CellAction::keep:
                break;
            }
          }

          auto adapted = forest.refine_and_coarsen(flags);
          std::vector<int> new_degrees(adapted.forest.n_leaves());
          std::vector<int> inherited_owner(adapted.forest.n_leaves());
          for (std::size_t i = 0; i < adapted.origins.size(); ++i) {
            const AdaptOrigin& org = adapted.origins[i];
            if (org.kind == AdaptOrigin::Kind::parent) {
              int degree = adjusted[org.old_index];
              for (int c = 1; c < 4; ++c)
                degree = std::max(degree, adjusted[org.old_index + c]);
              new_degrees[i] = degree;
              inherited_owner[i] = owner[org.old_index];
            } else {
              new_degrees[i] = adjusted[org.old_index];
              inherited_owner[i] = owner[org.old_index];
            }
          }

          forest = std::move(adapted.forest);
          degrees_global = std::move(new_degrees);
          owner = std::move(inherited_owner);
          my_degrees.clear();
          for (std::size_t i = 0; i < forest.n_leaves(); ++i)
            if (owner[i] == rank) my_degrees.emplace(forest.leaves()[i], degrees_global[i]);

          // Degree smoothing runs as the parallel relaxation, then the
          // smoothed owned degrees are gathered back into the replica.
          LocalView smooth_view(forest, owner, rank, n_ranks);
          const auto smoothed =
              smooth_degrees(smooth_view, my_degrees, config.degree_max, fabric);
          for (const CellKey& cell : smooth_view.owned()) my_degrees[cell] = smoothed.at(cell);

          ByteBuffer degree_buf;
          for (const CellKey& cell : smooth_view.owned()) {
            append_cell_key(degree_buf, cell);
            append_u32(degree_buf, static_cast<std::uint32_t>(my_degrees.at(cell)));
          }
          const auto degree_gathered =
              fabric.all_gather(rank, std::move(degree_buf), "smoothed-degrees");
          std::unordered_map<CellKey, int, CellKeyHash> degree_by_cell;
          for (const ByteBuffer& buf : degree_gathered) {
            ByteReader r(buf);
            while (!r.done()) {
              const CellKey cell = read_cell_key(r);
              degree_by_cell[cell] = static_cast<int>(r.read_u32());
            }
          }
          for (std::size_t i = 0; i < forest.n_leaves(); ++i)
            degrees_global[i] = degree_by_cell.at(forest.leaves()[i]);
        }
        m.t_adapt_ms = ms_since(t_adapt);

        // Repartition by the new weights and move the per-cell payloads.
        const auto t_partition = Clock::now();
        {
          weights = weights_of(degrees_global);
          const std::vector<int> new_owner = partition_by_weight(weights, n_ranks);

          std::vector<CellKey> owned_cells;
          for (std::size_t i = 0; i < forest.n_leaves(); ++i)
            if (owner[i] == rank) owned_cells.push_back(forest.leaves()[i]);
          const PackedCellData packed = pack(owned_cells, [&](const CellKey& cell) {
            ByteBuffer payload;
            append_u32(payload, static_cast<std::uint32_t>(my_degrees.at(cell)));
            return payload;
          });
          const auto sorted = sort_for_transfer(packed, [&](const CellKey& cell) {
            return new_owner[forest.index_of(cell)];
          });
          auto transferred = repartition_transfer(forest.leaves(), owner, new_owner, sorted,
                                                  rank, fabric);

          owner = new_owner;
          my_degrees.clear();
          for (std::size_t j = 0; j < transferred.received.cells.size(); ++j) {
            const auto payload = transferred.received.payload(j);
            ByteReader r(payload.data(), payload.size());
            const int degree = static_cast<int>(r.read_u32());
            const CellKey& cell = transferred.received.cells[j];
            if (degree != degrees_global[forest.index_of(cell)])
              throw std::logic_error("transferred degree disagrees with the replica");
            my_degrees.emplace(cell, degree);
          }

          ByteBuffer bytes_buf;
          append_u64(bytes_buf, transferred.bytes_sent);
          const auto gathered = fabric.all_gather(rank, std::move(bytes_buf), "transfer-bytes");
          for (const ByteBuffer& buf : gathered) {
            ByteReader r(buf);
            m.repartition_bytes += r.read_u64();
          }
        }
        m.t_partition_ms = ms_since(t_partition);
      } else {
        weights = weights_of(degrees_global);
      }

      // Enumerate, then build and merge the interface constraints.
      const auto t_enumerate = Clock::now();
      LocalView view(forest, owner, rank, n_ranks);
      ActiveFeMap afe_owned;
      for (const auto& [cell, degree] : my_degrees)
        afe_owned.emplace(cell, collection.index_of_degree(degree));
      const ActiveFeMap afe = exchange_active_fe_indices(view, afe_owned, fabric);
      const EnumerationResult enumeration = distribute_dofs(view, afe, collection, fabric);
      const auto local_constraints =
          build_interface_constraints(view, afe, enumeration.store, collection);
      m.t_enumerate_ms = ms_since(t_enumerate);

      // Merge the per-rank constraint sets; duplicates from interfaces seen
      // by several ranks must agree exactly.
      ByteBuffer constraint_buf;
      for (const auto& cc : local_constraints) encode_constraint(constraint_buf, cc);
      const auto constraint_gathered =
          fabric.all_gather(rank, std::move(constraint_buf), "constraint-gather");
      std::map<DofIndex, ClassifiedConstraint> merged;
      for (const ByteBuffer& buf : constraint_gathered) {
        ByteReader r(buf);
        while (!r.done()) {
          ClassifiedConstraint cc = decode_constraint(r);
          const auto [it, inserted] = merged.emplace(cc.constraint.dof, cc);
          if (!inserted && !(it->second.constraint.entries == cc.constraint.entries))
            throw std::logic_error("ranks disagree on a shared constraint");
        }
      }
      std::vector<Constraint> global_constraints;
      for (const auto& [dof, cc] : merged) {
        global_constraints.push_back(cc.constraint);
        if (cc.kind == ConstraintKind::hp_edge)
          ++m.hp_constraints;
        else
          ++m.hanging_constraints;
      }
      const std::vector<Constraint> closed = close(std::move(global_constraints));

      // Identity scan over the unified enumeration: coincident nodal
      // positions with disagreeing indices (none, by construction).
      {
        const auto violations = local_identity_violations(enumeration.store, collection);
        ByteBuffer buf;
        for (const std::string& v : violations) {
          append_u32(buf, static_cast<std::uint32_t>(v.size()));
          buf.insert(buf.end(), v.begin(), v.end());
        }
        const auto gathered = fabric.all_gather(rank, std::move(buf), "identity-scan");
        std::set<std::string> distinct;
        for (const ByteBuffer& b : gathered) {
          ByteReader r(b);
          while (!r.done()) {
            const std::uint32_t len = r.read_u32();
            std::string s(len, '\0');
            r.read_raw(reinterpret_cast<std::uint8_t*>(s.data()), len);
            distinct.insert(std::move(s));
          }
        }
        m.identity_constraints = distinct.size();
      }

      m.cells = forest.n_leaves();
      m.dofs = enumeration.cache.n_global;
      m.min_rank_dofs =
          *std::min_element(enumeration.cache.n_per_rank.begin(),
                            enumeration.cache.n_per_rank.end());
      m.max_rank_dofs =
          *std::max_element(enumeration.cache.n_per_rank.begin(),
                            enumeration.cache.n_per_rank.end());
      m.weight_imbalance = imbalance_of(weights);

      // Phase times: the slowest rank defines the stage time.
      {
        ByteBuffer buf;
        append_f64(buf, m.t_enumerate_ms);
        append_f64(buf, m.t_adapt_ms);
        append_f64(buf, m.t_partition_ms);
        const auto gathered = fabric.all_gather(rank, std::move(buf), "phase-times");
        m.t_enumerate_ms = m.t_adapt_ms = m.t_partition_ms = 0.0;
        for (const ByteBuffer& b : gathered) {
          ByteReader r(b);
          m.t_enumerate_ms = std::max(m.t_enumerate_ms, read_f64(r));
          m.t_adapt_ms = std::max(m.t_adapt_ms, read_f64(r));
          m.t_partition_ms = std::max(m.t_partition_ms, read_f64(r));
        }
      }

      if (rank == 0) {
        metrics[row] = m;
        constraint_dumps[row] = constraints_to_string(closed);
        if (config.dump_mesh) {
          std::ostringstream os;
          forest.dump(os, degrees_global, owner);
          mesh_dumps[row] = os.str();
        }
      }

      // Per-rank checkpoint shards after the final cycle.
      if (row + 1 == n_rows && !config.checkpoint_prefix.empty()) {
        std::vector<CellKey> owned_cells;
        for (std::size_t i = 0; i < forest.n_leaves(); ++i)
          if (owner[i] == rank) owned_cells.push_back(forest.leaves()[i]);
        const PackedCellData packed = pack(owned_cells, [&](const CellKey& cell) {
          ByteBuffer payload;
          append_u32(payload, static_cast<std::uint32_t>(my_degrees.at(cell)));
          return payload;
        });
        checkpoint_save(checkpoint_shard_path(config.checkpoint_prefix, rank), packed);
        if (rank == 0) {
          nlohmann::json meta;
          meta["domain"] = initial.domain;
          meta["ranks"] = n_ranks;
          meta["cycle"] = m.cycle;
          std::ofstream out(config.checkpoint_prefix + ".meta.json");
          out << meta.dump(2) << '\n';
        }
      }
    }
  });

  DriverResult result;
  result.metrics = metrics;
  std::ostringstream csv;
  csv << metrics_csv_header() << '\n';
  for (const CycleMetrics& m : metrics) csv << metrics_csv_row(m) << '\n';
  result.metrics_csv = csv.str();

  if (!config.output_dir.empty()) {
    const std::filesystem::path dir(config.output_dir);
    std::ofstream(dir / "metrics.csv") << result.metrics_csv;
    for (int row = 0; row < n_rows; ++row) {
      const int cycle = metrics[row].cycle;
      if (config.dump_mesh) {
        std::ofstream(dir / ("mesh_cycle" + std::to_string(cycle) + ".txt")) << mesh_dumps[row];
        std::ofstream(dir / ("constraints_cycle" + std::to_string(cycle) + ".txt"))
            << constraint_dumps[row];
      }
    }
  }
  return result;
}

}  // namespace hpdist

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <mutex>

#include "hpdist/constraints.hpp"
#include "hpdist/dof_enumerator.hpp"
#include "hpdist/driver.hpp"
#include "hpdist/partition.hpp"
#include "hpdist/sequential_oracle.hpp"

namespace py = pybind11;
using namespace hpdist;

namespace {

/// A forest plus per-cell polynomial degrees: the whole mesh state the
/// operations below need.
struct Mesh {
  Forest forest;
  std::vector<int> degrees;

  static Mesh fixture(const std::string& name) {
    if (name == "fig1") return {Forest(TreeLayout::two_cells()), {2, 4}};
    if (name == "fig2")
      return {Forest(TreeLayout::unit_square()).refined_uniformly(1), {2, 4, 4, 2}};
    throw std::invalid_argument("unknown fixture: " + name);
  }

  static Mesh lshape(int initial_refines, int degree) {
    Forest forest = Forest(TreeLayout::l_shape()).refined_uniformly(initial_refines);
    std::vector<int> degrees(forest.n_leaves(), degree);
    return {std::move(forest), std::move(degrees)};
  }

  std::size_t n_cells() const { return forest.n_leaves(); }
};

ElementCollection collection_for(const Mesh& mesh) {
  int lo = 12, hi = 1;
  for (const int d : mesh.degrees) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return ElementCollection::lagrange_range(std::min(lo, hi), hi);
}

std::vector<int> fe_of(const Mesh& mesh, const ElementCollection& collection) {
  std::vector<int> out(mesh.degrees.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = collection.index_of_degree(mesh.degrees[i]);
  return out;
}

py::dict distribute(const Mesh& mesh, int ranks, double exponent) {
  const ElementCollection collection = collection_for(mesh);
  std::vector<std::uint64_t> weights(mesh.degrees.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    weights[i] =
        cell_weight(std::uint64_t(mesh.degrees[i] + 1) * (mesh.degrees[i] + 1), {exponent, 1});
  const auto owner = partition_by_weight(weights, ranks);

  Fabric fabric(ranks);
  std::vector<std::uint64_t> n_per_rank(ranks);
  std::uint64_t n_global = 0;
  std::uint64_t first_bytes = 0, second_bytes = 0;
  std::mutex merge_mutex;
  std::map<DofIndex, Constraint> merged;

  run_on_ranks(fabric, [&](int rank) {
    LocalView view(mesh.forest, owner, rank, ranks);
    ActiveFeMap owned;
    for (const CellKey& cell : view.owned())
      owned.emplace(cell,
                    collection.index_of_degree(mesh.degrees[mesh.forest.index_of(cell)]));
    const ActiveFeMap afe = exchange_active_fe_indices(view, owned, fabric);
    const EnumerationResult result = distribute_dofs(view, afe, collection, fabric);
    const auto classified = build_interface_constraints(view, afe, result.store, collection);
    std::lock_guard lock(merge_mutex);
    if (rank == 0) {
      n_global = result.cache.n_global;
      for (int p = 0; p < ranks; ++p) n_per_rank[p] = result.cache.n_per_rank[p];
    }
    first_bytes += result.stats.first_exchange_bytes;
    second_bytes += result.stats.second_exchange_bytes;
    for (const auto& cc : classified) merged.emplace(cc.constraint.dof, cc.constraint);
  });

  std::vector<Constraint> all;
  for (const auto& [dof, c] : merged) all.push_back(c);
  const auto closed = close(std::move(all));

  py::dict out;
  out["n_dofs"] = n_global;
  out["n_per_rank"] = n_per_rank;
  out["n_constraints"] = closed.size();
  out["constraints"] = constraints_to_string(closed);
  out["first_exchange_bytes"] = first_bytes;
  out["second_exchange_bytes"] = second_bytes;
  return out;
}

py::dict metrics_to_dict(const CycleMetrics& m) {
  py::dict d;
  d["cycle"] = m.cycle;
  d["cells"] = m.cells;
  d["dofs"] = m.dofs;
  d["min_rank_dofs"] = m.min_rank_dofs;
  d["max_rank_dofs"] = m.max_rank_dofs;
  d["weight_imbalance"] = m.weight_imbalance;
  d["hp_constraints"] = m.hp_constraints;
  d["hanging_constraints"] = m.hanging_constraints;
  d["identity_constraints"] = m.identity_constraints;
  d["repartition_bytes"] = m.repartition_bytes;
  d["t_enumerate_ms"] = m.t_enumerate_ms;
  d["t_adapt_ms"] = m.t_adapt_ms;
  d["t_partition_ms"] = m.t_partition_ms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_hpdist, m) {
  m.doc() = "Distributed hp-adaptive mesh infrastructure on a simulated rank fabric";

  py::class_<Mesh>(m, "Mesh")
      .def_static("fixture", &Mesh::fixture, py::arg("name"),
                  "Built-in example meshes: 'fig1' (two cells, Q2|Q4) or "
                  "'fig2' (four cells, Q2,Q4/Q4,Q2).")
      .def_static("lshape", &Mesh::lshape, py::arg("initial_refines") = 2, py::arg("degree") = 2,
                  "L-shaped domain of three unit trees, uniformly refined.")
      .def_property_readonly("n_cells", &Mesh::n_cells)
      .def_property_readonly("degrees", [](const Mesh& mesh) { return mesh.degrees; })
      .def("__repr__", [](const Mesh& mesh) {
        return "<hpdist.Mesh with " + std::to_string(mesh.n_cells()) + " cells>";
      });

  m.def(
      "naive_count",
      [](const Mesh& mesh) {
        const auto collection = collection_for(mesh);
        return naive_enumerate(mesh.forest, fe_of(mesh, collection), collection).n_dofs;
      },
      py::arg("mesh"), "Cell-by-cell enumeration without any sharing.");

  m.def(
      "unified_count",
      [](const Mesh& mesh) {
        const auto collection = collection_for(mesh);
        return unified_enumerate(mesh.forest, fe_of(mesh, collection), collection).n_dofs;
      },
      py::arg("mesh"), "Sequential enumeration with coincident DoFs unified.");

  m.def("distribute", &distribute, py::arg("mesh"), py::arg("ranks") = 1,
        py::arg("exponent") = 1.9,
        "Weighted partition plus the staged parallel enumeration; returns the "
        "global count, per-rank counts, and the closed interface constraints.");

  m.def("cell_weight",
        [](std::uint64_t n_dofs, double exponent, std::uint64_t scale) {
          return cell_weight(n_dofs, {exponent, scale});
        },
        py::arg("n_dofs"), py::arg("exponent") = 1.9, py::arg("scale") = 1);

  m.def(
      "partition_by_weight",
      [](const std::vector<std::uint64_t>& weights, int ranks) {
        return partition_by_weight(weights, ranks);
      },
      py::arg("weights"), py::arg("ranks"));

  m.def(
      "run_driver",
      [](int ranks, int cycles, int initial_refines, double exponent, int degree_min,
         int degree_max, double refine_frac, double coarsen_frac, double p_frac,
         const std::string& output, const std::string& checkpoint, const std::string& restart,
         bool dump_mesh, const std::string& fixture) {
        DriverConfig config;
        config.ranks = ranks;
        config.cycles = cycles;
        config.initial_refines = initial_refines;
        config.exponent = exponent;
        config.degree_min = degree_min;
        config.degree_max = degree_max;
        config.refine_fraction = refine_frac;
        config.coarsen_fraction = coarsen_frac;
        config.p_fraction = p_frac;
        config.output_dir = output;
        config.checkpoint_prefix = checkpoint;
        config.restart_prefix = restart;
        config.dump_mesh = dump_mesh;
        config.fixture = fixture;
        const DriverResult result = run_driver(config);
        py::list rows;
        for (const auto& row : result.metrics) rows.append(metrics_to_dict(row));
        py::dict out;
        out["metrics"] = rows;
        out["csv"] = result.metrics_csv;
        return out;
      },
      py::arg("ranks") = 1, py::arg("cycles") = 3, py::arg("initial_refines") = 3,
      py::arg("exponent") = 1.9, py::arg("degree_min") = 2, py::arg("degree_max") = 7,
      py::arg("refine_frac") = 0.30, py::arg("coarsen_frac") = 0.03, py::arg("p_frac") = 0.90,
      py::arg("output") = "", py::arg("checkpoint") = "", py::arg("restart") = "",
      py::arg("dump_mesh") = false, py::arg("fixture") = "",
      "Full adaptation loop on the simulated fabric; returns per-cycle metrics.");
}

// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 the hpdist authors

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hpdist/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hp-adaptive mesh infrastructure driver on a simulated rank fabric"};

  hpdist::DriverConfig config;
  std::string degrees = "2..7";

  app.add_option("--ranks", config.ranks, "number of simulated ranks")->check(CLI::Range(1, 512));
  app.add_option("--cycles", config.cycles, "number of adaptation cycles")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--initial-refines", config.initial_refines,
                 "uniform refinements of the initial mesh")
      ->check(CLI::Range(0, 12));
  app.add_option("--exponent", config.exponent, "load balancing weight exponent c")
      ->check(CLI::PositiveNumber);
  app.add_option("--degrees", degrees, "element degree range MIN..MAX");
  app.add_option("--refine-frac", config.refine_fraction, "fraction of cells to refine");
  app.add_option("--coarsen-frac", config.coarsen_fraction, "fraction of cells to coarsen");
  app.add_option("--p-frac", config.p_fraction, "fraction of marked cells that are p-adapted");
  app.add_option("--output", config.output_dir, "directory for metrics and dumps");
  app.add_option("--checkpoint", config.checkpoint_prefix,
                 "write per-rank checkpoint shards with this prefix after the last cycle");
  app.add_option("--restart", config.restart_prefix, "resume from checkpoint shards");
  app.add_flag("--dump-mesh", config.dump_mesh, "write per-cycle mesh and constraint dumps");
  app.add_option("--fixture", config.fixture, "built-in example mesh (fig1 or fig2)")
      ->check(CLI::IsMember({"fig1", "fig2"}));

  CLI11_PARSE(app, argc, argv);

  const auto sep = degrees.find("..");
  if (sep == std::string::npos) {
    std::cerr << "--degrees expects MIN..MAX\n";
    return 1;
  }
  try {
    config.degree_min = std::stoi(degrees.substr(0, sep));
    config.degree_max = std::stoi(degrees.substr(sep + 2));
  } catch (const std::exception&) {
    std::cerr << "--degrees expects MIN..MAX\n";
    return 1;
  }

  try {
    const hpdist::DriverResult result = hpdist::run_driver(config);
    std::cout << hpdist::metrics_csv_header() << '\n';
    for (const auto& row : result.metrics) std::cout << hpdist::metrics_csv_row(row) << '\n';
    if (!config.output_dir.empty())
      std::cout << "metrics written to " << config.output_dir << "/metrics.csv\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

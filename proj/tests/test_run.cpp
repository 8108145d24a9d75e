#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "fisher/run.hpp"
#include "helpers.hpp"

using namespace fisher;

TEST_CASE("algorithm names round-trip") {
  const char* names[] = {"PGLS", "BCDEG",   "BCDEG-LS", "BCDEG-CES",
                         "BCDEG-LS-CES", "PR", "PRLS", "BCPR",
                         "BCPR-LS", "A-BCPR", "PR-CES", "BCPR-CES"};
  for (const char* name : names) {
    const auto a = algo_from_name(name);
    REQUIRE(a.has_value());
    REQUIRE(std::string(algo_name(*a)) == name);
  }
  REQUIRE_FALSE(algo_from_name("GRADIENT").has_value());
}

TEST_CASE("checkpoints land on the grid and increase strictly") {
  const MarketInstance inst =
      testutil::small_random_instance(1, Utility::Linear, 4, 5);
  RunConfig cfg;
  cfg.algo = Algo::Bcpr;
  cfg.seed = 2;
  cfg.work_budget = 4000;
  cfg.checkpoint_every = 137;  // deliberately off the step size
  const RunResult res = run_solver(inst, cfg);
  REQUIRE_FALSE(res.records.empty());
  long long prev = 0;
  for (const MetricsRecord& r : res.records) {
    REQUIRE(r.work % 137 == 0);
    REQUIRE(r.work > prev);
    prev = r.work;
  }
  REQUIRE(res.work >= cfg.work_budget);
  REQUIRE(res.work < cfg.work_budget + inst.m);
}

TEST_CASE("block descent on the default grid yields consecutive multiples") {
  const MarketInstance inst =
      testutil::small_random_instance(2, Utility::Linear, 4, 6);
  const long long nm = static_cast<long long>(inst.n) * inst.m;
  RunConfig cfg;
  cfg.algo = Algo::Bcdeg;
  cfg.seed = 0;
  cfg.work_budget = 20 * nm;
  const RunResult res = run_solver(inst, cfg);
  REQUIRE(res.records.size() == 20);
  for (std::size_t k = 0; k < res.records.size(); ++k)
    REQUIRE(res.records[k].work == static_cast<long long>(k + 1) * nm);
}

TEST_CASE("a tolerance stop ends the run early") {
  const MarketInstance inst =
      testutil::small_random_instance(3, Utility::Linear, 3, 3);
  RunConfig cfg;
  cfg.algo = Algo::BcprLs;
  cfg.seed = 1;
  cfg.work_budget = 1000000;
  cfg.checkpoint_every = 9;
  cfg.tol = 1e-8;
  const RunResult res = run_solver(inst, cfg);
  REQUIRE(res.reached_tol);
  REQUIRE(res.work < cfg.work_budget);
  REQUIRE(res.records.back().duality_gap <= cfg.tol);
  // Without a tolerance the same run exhausts its budget.
  cfg.tol = 0.0;
  cfg.work_budget = 900;
  const RunResult full = run_solver(inst, cfg);
  REQUIRE_FALSE(full.reached_tol);
  REQUIRE(full.work >= 900);
}

TEST_CASE("invalid configurations are rejected up front") {
  const MarketInstance lin =
      testutil::small_random_instance(4, Utility::Linear, 3, 3);
  const MarketInstance ces =
      testutil::small_random_instance(4, Utility::Ces, 3, 3);
  RunConfig cfg;
  cfg.algo = Algo::Bcdeg;
  cfg.work_budget = 0;
  REQUIRE_THROWS_AS(run_solver(lin, cfg), std::invalid_argument);
  cfg.work_budget = 100;
  cfg.checkpoint_every = 101;
  REQUIRE_THROWS_AS(run_solver(lin, cfg), std::invalid_argument);
  cfg.checkpoint_every = 0;
  REQUIRE_THROWS_AS(run_solver(ces, cfg), std::invalid_argument);  // family
  cfg.algo = Algo::BcprCes;
  REQUIRE_THROWS_AS(run_solver(lin, cfg), std::invalid_argument);
  REQUIRE_NOTHROW(run_solver(ces, cfg));
}

TEST_CASE("every algorithm runs its own family end to end") {
  const MarketInstance lin =
      testutil::small_random_instance(5, Utility::Linear, 3, 4);
  const MarketInstance ces =
      testutil::small_random_instance(5, Utility::Ces, 3, 4);
  for (Algo a : {Algo::Pgls, Algo::Bcdeg, Algo::BcdegLs, Algo::Pr, Algo::Prls,
                 Algo::Bcpr, Algo::BcprLs, Algo::Abcpr}) {
    RunConfig cfg;
    cfg.algo = a;
    cfg.work_budget = 3000;
    const RunResult res = run_solver(lin, cfg);
    REQUIRE_FALSE(res.records.empty());
    REQUIRE(res.final_gap < 1.0);
    REQUIRE(static_cast<int>(res.final_utilities.size()) == lin.n);
  }
  for (Algo a : {Algo::BcdegCes, Algo::BcdegLsCes, Algo::PrCes, Algo::BcprCes}) {
    RunConfig cfg;
    cfg.algo = a;
    cfg.work_budget = 3000;
    const RunResult res = run_solver(ces, cfg);
    REQUIRE_FALSE(res.records.empty());
    REQUIRE(res.final_gap < 1.0);
  }
}

TEST_CASE("repeated runs replay the identical metrics stream") {
  const MarketInstance inst =
      testutil::small_random_instance(6, Utility::Linear, 4, 4);
  RunConfig cfg;
  cfg.algo = Algo::BcdegLs;
  cfg.seed = 9;
  cfg.work_budget = 5000;
  cfg.checkpoint_every = 64;
  const RunResult a = run_solver(inst, cfg);
  const RunResult b = run_solver(inst, cfg);
  REQUIRE(metrics_csv_string(a.records) == metrics_csv_string(b.records));
  REQUIRE(a.final_x.a == b.final_x.a);
  // A different seed takes a different trajectory.
  cfg.seed = 10;
  const RunResult c = run_solver(inst, cfg);
  REQUIRE(metrics_csv_string(a.records) != metrics_csv_string(c.records));
}

TEST_CASE("utility gaps appear exactly when a reference is supplied") {
  const MarketInstance inst =
      testutil::small_random_instance(7, Utility::Linear, 3, 3);
  RunConfig cfg;
  cfg.algo = Algo::Bcpr;
  cfg.work_budget = 2000;
  const RunResult bare = run_solver(inst, cfg);
  for (const MetricsRecord& r : bare.records)
    REQUIRE_FALSE(r.utility_gap.has_value());

  const ReferenceResult ref = reference_equilibrium(inst);
  REQUIRE(ref.converged);
  const RunResult tracked = run_solver(inst, cfg, &ref.utilities);
  for (const MetricsRecord& r : tracked.records) {
    REQUIRE(r.utility_gap.has_value());
    REQUIRE(*r.utility_gap >= 0.0);
  }
  // The gap to the reference shrinks as the run converges.
  REQUIRE(tracked.records.back().utility_gap.value() <
          tracked.records.front().utility_gap.value());
}

TEST_CASE("aggregation groups by algorithm and work with population spread") {
  MetricsRecord a;
  a.algo = "BCDEG";
  a.work = 10;
  a.duality_gap = 1.0;
  a.supply_res = 0.5;
  a.budget_res = 2.0;
  a.bpb_res = 4.0;
  MetricsRecord b = a;
  b.seed = 1;
  b.duality_gap = 3.0;
  b.supply_res = 1.5;
  b.budget_res = 2.0;
  b.bpb_res = 0.0;
  MetricsRecord lone;
  lone.algo = "PR";
  lone.work = 10;
  lone.duality_gap = 7.0;

  const auto cells = aggregate_records({a, b, lone});
  REQUIRE(cells.size() == 2);
  REQUIRE(cells[0].algo == "BCDEG");
  REQUIRE(cells[0].count == 2);
  REQUIRE(cells[0].gap_mean == Catch::Approx(2.0));
  REQUIRE(cells[0].gap_std == Catch::Approx(1.0));
  REQUIRE(cells[0].supply_mean == Catch::Approx(1.0));
  REQUIRE(cells[0].supply_std == Catch::Approx(0.5));
  REQUIRE(cells[0].budget_std == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(cells[0].bpb_mean == Catch::Approx(2.0));
  REQUIRE_FALSE(cells[0].ugap_mean.has_value());
  // A single run aggregates with zero spread.
  REQUIRE(cells[1].count == 1);
  REQUIRE(cells[1].gap_mean == Catch::Approx(7.0));
  REQUIRE(cells[1].gap_std == 0.0);
}

TEST_CASE("utility aggregates require every grouped run to carry one") {
  MetricsRecord with;
  with.algo = "PR";
  with.work = 5;
  with.duality_gap = 1.0;
  with.utility_gap = 0.5;
  MetricsRecord without = with;
  without.utility_gap.reset();

  const auto mixed = aggregate_records({with, without});
  REQUIRE(mixed.size() == 1);
  REQUIRE_FALSE(mixed[0].ugap_mean.has_value());

  MetricsRecord second = with;
  second.utility_gap = 1.5;
  const auto full = aggregate_records({with, second});
  REQUIRE(full[0].ugap_mean.has_value());
  REQUIRE(*full[0].ugap_mean == Catch::Approx(1.0));
  REQUIRE(*full[0].ugap_std == Catch::Approx(0.5));
}

TEST_CASE("comparison csv lays out the documented columns") {
  MetricsRecord a;
  a.algo = "BCPR";
  a.work = 4;
  a.duality_gap = 0.5;
  a.supply_res = 0.25;
  a.budget_res = 1.0;
  a.bpb_res = 2.0;
  std::ostringstream out;
  write_compare_csv(aggregate_records({a}), out);
  REQUIRE(out.str() ==
          "algo,work,runs,duality_gap_mean,duality_gap_std,utility_gap_mean,"
          "utility_gap_std,supply_res_mean,supply_res_std,budget_res_mean,"
          "budget_res_std,bpb_res_mean,bpb_res_std\n"
          "BCPR,4,1,0.5,0,,,0.25,0,1,0,2,0\n");
}

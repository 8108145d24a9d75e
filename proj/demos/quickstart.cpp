// Minimal tour: build a small market by hand, run one randomized-block solver
// to a tight duality gap, and print the trajectory plus the equilibrium.

#include <cstdio>

#include "fisher/fisher.hpp"

int main() {
  fisher::MarketInstance inst;
  inst.n = 3;
  inst.m = 4;
  inst.budgets = {1.0, 2.0, 1.5};
  inst.valuations = fisher::Mat(3, 4);
  const double vals[3][4] = {
      {4.0, 1.0, 2.0, 0.5},
      {1.0, 3.0, 1.0, 2.0},
      {2.0, 2.0, 3.0, 1.0},
  };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) inst.valuations(i, j) = vals[i][j];
  inst.utility = fisher::Utility::Linear;
  fisher::validate(inst);

  fisher::RunConfig cfg;
  cfg.algo = fisher::Algo::BcprLs;
  cfg.seed = 7;
  cfg.work_budget = 400000;
  cfg.checkpoint_every = 2000;
  cfg.tol = 1e-10;

  const fisher::RunResult res = fisher::run_solver(inst, cfg);

  std::printf("%-10s %-14s\n", "work", "duality gap");
  for (std::size_t k = 0; k < res.records.size(); ++k) {
    // Thin out the trajectory; the first and last rows always print.
    if (k % 20 != 0 && k + 1 != res.records.size()) continue;
    std::printf("%-10lld %-14.6e\n", res.records[k].work,
                res.records[k].duality_gap);
  }

  std::printf("\nconverged: %s (gap %.3e after %lld valuation accesses)\n",
              res.reached_tol ? "yes" : "no", res.final_gap, res.work);
  std::printf("prices:   ");
  for (const double p : res.final_prices) std::printf(" %8.5f", p);
  std::printf("\nutilities:");
  for (const double u : res.final_utilities) std::printf(" %8.5f", u);
  std::printf("\n");
  return 0;
}

// Generate a random market and race a few solvers against the same work
// budget, printing the aggregated gap trajectory per method.

#include <cstdio>
#include <vector>

#include "fisher/fisher.hpp"

int main() {
  fisher::GeneratorSpec spec;
  spec.kind = fisher::Utility::Linear;
  spec.n = 40;
  spec.m = 40;
  spec.seed = 11;
  const fisher::MarketInstance inst = fisher::generate_low_rank(spec);

  const fisher::Algo algos[] = {fisher::Algo::Bcdeg, fisher::Algo::BcdegLs,
                                fisher::Algo::Bcpr, fisher::Algo::BcprLs,
                                fisher::Algo::Prls};
  const int seeds = 5;
  const long long budget = 40LL * 40 * 400;

  std::vector<fisher::MetricsRecord> all;
  for (const fisher::Algo algo : algos)
    for (int s = 0; s < seeds; ++s) {
      fisher::RunConfig cfg;
      cfg.algo = algo;
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.work_budget = budget;
      cfg.checkpoint_every = 40LL * 40 * 40;
      const fisher::RunResult res = fisher::run_solver(inst, cfg);
      all.insert(all.end(), res.records.begin(), res.records.end());
    }

  std::printf("%-12s %-10s %-14s %-12s\n", "algo", "work", "gap (mean)",
              "gap (std)");
  for (const fisher::CompareCell& c : fisher::aggregate_records(all))
    std::printf("%-12s %-10lld %-14.6e %-12.3e\n", c.algo.c_str(), c.work,
                c.gap_mean, c.gap_std);
  return 0;
}

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fisher/eg_solvers.hpp"
#include "fisher/market.hpp"
#include "fisher/metrics.hpp"
#include "fisher/pr_solvers.hpp"

namespace fisher {

enum class Algo {
  Pgls,
  Bcdeg,
  BcdegLs,
  BcdegCes,
  BcdegLsCes,
  Pr,
  Prls,
  Bcpr,
  BcprLs,
  Abcpr,
  PrCes,
  BcprCes,
};

inline const char* algo_name(Algo a) {
  switch (a) {
    case Algo::Pgls: return "PGLS";
    case Algo::Bcdeg: return "BCDEG";
    case Algo::BcdegLs: return "BCDEG-LS";
    case Algo::BcdegCes: return "BCDEG-CES";
    case Algo::BcdegLsCes: return "BCDEG-LS-CES";
    case Algo::Pr: return "PR";
    case Algo::Prls: return "PRLS";
    case Algo::Bcpr: return "BCPR";
    case Algo::BcprLs: return "BCPR-LS";
    case Algo::Abcpr: return "A-BCPR";
    case Algo::PrCes: return "PR-CES";
    case Algo::BcprCes: return "BCPR-CES";
  }
  return "?";
}

inline std::optional<Algo> algo_from_name(const std::string& s) {
  for (Algo a : {Algo::Pgls, Algo::Bcdeg, Algo::BcdegLs, Algo::BcdegCes,
                 Algo::BcdegLsCes, Algo::Pr, Algo::Prls, Algo::Bcpr,
                 Algo::BcprLs, Algo::Abcpr, Algo::PrCes, Algo::BcprCes})
    if (s == algo_name(a)) return a;
  return std::nullopt;
}

inline bool algo_uses_ces(Algo a) {
  return a == Algo::BcdegCes || a == Algo::BcdegLsCes || a == Algo::PrCes ||
         a == Algo::BcprCes;
}

inline bool algo_is_eg_side(Algo a) {
  return a == Algo::Pgls || a == Algo::Bcdeg || a == Algo::BcdegLs ||
         a == Algo::BcdegCes || a == Algo::BcdegLsCes;
}

// A run is a (solver, instance, seed) triple driven until the work budget
// or a target duality gap is hit, with metric snapshots on a fixed work
// grid. NaN line-search fields mean "use the algorithm family default".
struct RunConfig {
  Algo algo = Algo::Bcdeg;
  std::uint64_t seed = 0;
  long long work_budget = 0;
  long long checkpoint_every = 0;  // 0: n*m
  double tol = 0.0;                // <= 0: run to the budget
  double rho_minus = std::numeric_limits<double>::quiet_NaN();
  double rho_plus = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double alpha_max = std::numeric_limits<double>::quiet_NaN();
  double alpha_bar = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  std::vector<MetricsRecord> records;
  bool reached_tol = false;
  long long work = 0;
  double final_gap = std::numeric_limits<double>::infinity();
  std::vector<double> final_utilities;  // reported units
  std::vector<double> final_prices;
  Mat final_x;
  Mat final_bids;  // bid-side algorithms only
  double wall_seconds = 0.0;
};

namespace detail {

inline void check_run_config(const MarketInstance& inst, const RunConfig& cfg,
                             long long checkpoint) {
  if (cfg.work_budget <= 0)
    throw std::invalid_argument("run: work budget must be positive");
  if (checkpoint <= 0)
    throw std::invalid_argument("run: checkpoint period must be positive");
  if (checkpoint > cfg.work_budget)
    throw std::invalid_argument("run: checkpoint period exceeds work budget");
  const bool ces = inst.utility == Utility::Ces;
  if (algo_uses_ces(cfg.algo) != ces)
    throw std::invalid_argument(std::string("run: algorithm ") +
                                algo_name(cfg.algo) + " does not apply to a " +
                                (ces ? "CES" : "linear") + " instance");
}

}  // namespace detail

inline RunResult run_solver(const MarketInstance& inst, const RunConfig& cfg,
                            const std::vector<double>* ref_utilities = nullptr) {
  const long long grid =
      cfg.checkpoint_every > 0
          ? cfg.checkpoint_every
          : static_cast<long long>(inst.n) * inst.m;
  detail::check_run_config(inst, cfg, grid);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string name = algo_name(cfg.algo);

  RunResult out;
  long long next_cp = grid;

  const auto on_checkpoint = [&](const MetricsRecord& rec) {
    out.records.push_back(rec);
    next_cp = rec.work + grid;
    return cfg.tol > 0.0 && rec.duality_gap <= cfg.tol;
  };
  const auto snap = [&](long long work) { return (work + grid - 1) / grid * grid; };

  if (algo_is_eg_side(cfg.algo)) {
    const ExtrapolationBounds bounds = extrapolation_bounds(inst);
    const LipschitzProfile prof = lipschitz_profile(inst, bounds);
    EgSolverState st = init_allocation(inst, bounds, prof, cfg.seed);
    if (!std::isnan(cfg.rho_minus)) st.ls.shrink = cfg.rho_minus;
    if (!std::isnan(cfg.rho_plus)) st.ls.grow = cfg.rho_plus;

    while (st.work < cfg.work_budget) {
      switch (cfg.algo) {
        case Algo::Pgls: pgls_step(st, inst, bounds, prof); break;
        case Algo::Bcdeg:
        case Algo::BcdegCes: bcdeg_step(st, inst, bounds, prof); break;
        default: bcdeg_ls_step(st, inst, bounds, prof); break;
      }
      if (st.work >= next_cp) {
        const MetricsRecord rec = measure_allocation(
            inst, st.x, name, cfg.seed, snap(st.work), ref_utilities);
        if (on_checkpoint(rec)) {
          out.reached_tol = true;
          break;
        }
      }
    }
    out.work = st.work;
    out.final_x = st.x;
    const std::vector<double> u = compute_utilities(inst, st.x);
    bool pos = true;
    for (double ui : u) pos = pos && ui > 0.0;
    if (pos) {
      out.final_prices = prices_from_allocation(inst, st.x, u);
      out.final_gap = duality_gap(inst, out.final_prices, u);
    }
    out.final_utilities = reported_utilities(inst, st.x);
  } else {
    PrParams params;
    if (cfg.algo == Algo::Prls) params.grow = 2.0;
    if (!std::isnan(cfg.rho_minus)) params.shrink = cfg.rho_minus;
    if (!std::isnan(cfg.rho_plus)) params.grow = cfg.rho_plus;
    if (!std::isnan(cfg.delta)) params.delta = cfg.delta;
    if (!std::isnan(cfg.alpha_max)) params.alpha_max = cfg.alpha_max;
    if (!std::isnan(cfg.alpha_bar)) params.alpha_bar = cfg.alpha_bar;
    PrSolverState st = init_bids(inst, cfg.seed, params);

    while (st.work < cfg.work_budget) {
      switch (cfg.algo) {
        case Algo::Pr: pr_step(st, inst); break;
        case Algo::Prls: prls_step(st, inst); break;
        case Algo::Bcpr: bcpr_step(st, inst); break;
        case Algo::BcprLs: bcpr_ls_step(st, inst); break;
        case Algo::Abcpr: abcpr_step(st, inst); break;
        case Algo::PrCes: pr_ces_step(st, inst); break;
        default: bcpr_ces_step(st, inst); break;
      }
      if (st.work >= next_cp) {
        const MetricsRecord rec = measure_bids(inst, st.b, name, cfg.seed,
                                               snap(st.work), ref_utilities);
        if (on_checkpoint(rec)) {
          out.reached_tol = true;
          break;
        }
      }
    }
    out.work = st.work;
    out.final_bids = st.b;
    std::vector<double> p(inst.m, 0.0);
    for (int j = 0; j < inst.m; ++j) {
      double s = 0.0;
      for (int i = 0; i < inst.n; ++i) s += st.b(i, j);
      p[j] = s;
    }
    out.final_prices = p;
    out.final_x = allocation_from_bids(inst, st.b, p);
    const std::vector<double> u = compute_utilities(inst, out.final_x);
    out.final_gap = duality_gap(inst, p, u);
    out.final_utilities = reported_utilities(inst, out.final_x);
  }

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Mean/stddev aggregation of a sweep, grouped by (algorithm, work). Stddev
// is the population form, so a single seed reports exact zeros. Utility-gap
// aggregates stay empty unless every grouped record carries one.
struct CompareCell {
  std::string algo;
  long long work = 0;
  int count = 0;
  double gap_mean = 0.0, gap_std = 0.0;
  std::optional<double> ugap_mean, ugap_std;
  double supply_mean = 0.0, supply_std = 0.0;
  double budget_mean = 0.0, budget_std = 0.0;
  double bpb_mean = 0.0, bpb_std = 0.0;
};

inline std::vector<CompareCell> aggregate_records(
    const std::vector<MetricsRecord>& records) {
  std::vector<CompareCell> cells;
  const auto cell_for = [&](const std::string& algo, long long work) -> CompareCell& {
    for (auto& c : cells)
      if (c.algo == algo && c.work == work) return c;
    cells.push_back({});
    cells.back().algo = algo;
    cells.back().work = work;
    return cells.back();
  };
  // two-pass: means, then spreads
  std::vector<int> ugap_counts;
  for (const auto& r : records) {
    CompareCell& c = cell_for(r.algo, r.work);
    ++c.count;
    c.gap_mean += r.duality_gap;
    c.supply_mean += r.supply_res;
    c.budget_mean += r.budget_res;
    c.bpb_mean += r.bpb_res;
    if (r.utility_gap) c.ugap_mean = c.ugap_mean.value_or(0.0) + *r.utility_gap;
  }
  for (auto& c : cells) {
    c.gap_mean /= c.count;
    c.supply_mean /= c.count;
    c.budget_mean /= c.count;
    c.bpb_mean /= c.count;
  }
  ugap_counts.assign(cells.size(), 0);
  for (const auto& r : records)
    if (r.utility_gap) {
      for (std::size_t k = 0; k < cells.size(); ++k)
        if (cells[k].algo == r.algo && cells[k].work == r.work) ++ugap_counts[k];
    }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    // utility aggregates only when every run in the cell carried one
    if (ugap_counts[k] == cells[k].count && cells[k].ugap_mean) {
      *cells[k].ugap_mean /= cells[k].count;
      cells[k].ugap_std = 0.0;
    } else {
      cells[k].ugap_mean.reset();
    }
  }
  for (const auto& r : records) {
    CompareCell& c = cell_for(r.algo, r.work);
    const auto sq = [](double d) { return d * d; };
    c.gap_std += sq(r.duality_gap - c.gap_mean);
    c.supply_std += sq(r.supply_res - c.supply_mean);
    c.budget_std += sq(r.budget_res - c.budget_mean);
    c.bpb_std += sq(r.bpb_res - c.bpb_mean);
    if (r.utility_gap && c.ugap_mean)
      *c.ugap_std += sq(*r.utility_gap - *c.ugap_mean);
  }
  for (auto& c : cells) {
    c.gap_std = std::sqrt(c.gap_std / c.count);
    c.supply_std = std::sqrt(c.supply_std / c.count);
    c.budget_std = std::sqrt(c.budget_std / c.count);
    c.bpb_std = std::sqrt(c.bpb_std / c.count);
    if (c.ugap_std) *c.ugap_std = std::sqrt(*c.ugap_std / c.count);
  }
  return cells;
}

inline void write_compare_csv(const std::vector<CompareCell>& cells,
                              std::ostream& out) {
  out << "algo,work,runs,duality_gap_mean,duality_gap_std,utility_gap_mean,"
         "utility_gap_std,supply_res_mean,supply_res_std,budget_res_mean,"
         "budget_res_std,bpb_res_mean,bpb_res_std\n";
  for (const auto& c : cells) {
    out << c.algo << ',' << c.work << ',' << c.count << ','
        << detail::fmt_double(c.gap_mean) << ',' << detail::fmt_double(c.gap_std)
        << ',';
    if (c.ugap_mean) out << detail::fmt_double(*c.ugap_mean);
    out << ',';
    if (c.ugap_std) out << detail::fmt_double(*c.ugap_std);
    out << ',' << detail::fmt_double(c.supply_mean) << ','
        << detail::fmt_double(c.supply_std) << ','
        << detail::fmt_double(c.budget_mean) << ','
        << detail::fmt_double(c.budget_std) << ','
        << detail::fmt_double(c.bpb_mean) << ','
        << detail::fmt_double(c.bpb_std) << '\n';
  }
}

}  // namespace fisher

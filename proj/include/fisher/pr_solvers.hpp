#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fisher/eg_solvers.hpp"  // kCacheRefreshPeriod
#include "fisher/market.hpp"
#include "fisher/rng.hpp"

namespace fisher {

// Stepsize policy knobs for the bid-space methods. shrink/grow drive the
// per-buyer KL backtracking (grow defaults to the block value 1.05; the
// full-matrix search overrides it to 2 at configuration time). delta > 0
// biases the tested step so the certificate holds with margin; the default
// is the undamped delta = 0 mode. alpha_max caps both searched stepsizes
// (full-matrix and per-buyer), alpha_bar caps (and exponentiates in) the
// adaptive per-buyer bound.
struct PrParams {
  double shrink = 0.5;
  double grow = 1.05;
  double delta = 0.0;
  double alpha_max = 64.0;
  double alpha_bar = 8.0;
};

struct PrSolverState {
  Mat b;                        // bids, row i sums to B_i
  std::vector<double> prices;   // cached column sums of b
  std::vector<double> alpha;    // per-buyer stepsizes
  double md_alpha = 1.0;        // full-matrix stepsize
  int md_backtracks = 0;        // backtracks spent by the previous iteration
  Rng rng;
  long long work = 0;
  PrParams params;
  long long updates_since_refresh = 0;
  double last_refresh_drift = 0.0;

  PrSolverState(int n, int m, std::uint64_t seed) : b(n, m), rng(seed) {}
};

// Budget spread uniformly over the buyer's support: b_ij = B_i / |supp(i)|
// on valued items, 0 elsewhere. Every update preserves this support, and
// every item has a positive price because every column has a valued entry.
inline PrSolverState init_bids(const MarketInstance& inst, std::uint64_t seed,
                               const PrParams& params = {}) {
  PrSolverState st(inst.n, inst.m, seed);
  st.params = params;
  for (int i = 0; i < inst.n; ++i) {
    int supp = 0;
    for (int j = 0; j < inst.m; ++j) supp += inst.valuations(i, j) > 0.0;
    if (supp == 0)
      throw std::invalid_argument("init_bids: buyer values no item");
    const double share = inst.budgets[i] / supp;
    for (int j = 0; j < inst.m; ++j)
      if (inst.valuations(i, j) > 0.0) st.b(i, j) = share;
  }
  st.prices.assign(inst.m, 0.0);
  for (int j = 0; j < inst.m; ++j) {
    double s = 0.0;
    for (int i = 0; i < inst.n; ++i) s += st.b(i, j);
    st.prices[j] = s;
  }
  st.alpha.assign(inst.n, 1.0);
  return st;
}

// phi(b) = -sum_ij b_ij log(v_ij / p_j(b)) with p the column sums of b.
// Zero bids contribute nothing; a positive bid on a zero-valuation entry has
// no finite objective value and is rejected.
inline double shmyrev_objective(const MarketInstance& inst, const Mat& b) {
  if (b.rows != inst.n || b.cols != inst.m)
    throw std::invalid_argument("shmyrev_objective: bid shape mismatch");
  std::vector<double> p(inst.m, 0.0);
  for (int j = 0; j < inst.m; ++j) {
    double s = 0.0;
    for (int i = 0; i < inst.n; ++i) s += b(i, j);
    p[j] = s;
  }
  double phi = 0.0;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.m; ++j) {
      const double bij = b(i, j);
      if (bij == 0.0) continue;
      const double v = inst.valuations(i, j);
      if (v <= 0.0)
        throw std::invalid_argument(
            "shmyrev_objective: positive bid on zero-valuation entry");
      phi -= bij * std::log(v / p[j]);
    }
  return phi;
}

// In exact arithmetic every multiplicative update keeps support bids strictly
// positive, but (v/p)^alpha can leave the double range when alpha is large
// and an item is nearly worthless. Clamping the reweighting factor and
// flooring surviving bids at a mass that is negligible against any budget
// preserves the positivity invariant without touching the benign regime
// (both guards are pure comparisons there).
inline constexpr double kReweightMin = 1e-120;
inline constexpr double kReweightMax = 1e120;
inline constexpr double kBidFloor = 1e-250;

namespace detail {

inline void floor_support_bids(const MarketInstance& inst, const Mat& b, int i,
                               std::vector<double>& row) {
  const double tiny = kBidFloor * inst.budgets[i];
  for (int j = 0; j < inst.m; ++j)
    if (b(i, j) > 0.0 && row[j] < tiny) row[j] = tiny;
}

}  // namespace detail

// Proportional response step for one buyer: reweight bids by (v/p)^alpha and
// renormalize to the budget. alpha = 1 is the classic update b' = B * w / Z
// with w_j = b_j v_j / p_j.
inline std::vector<double> bcpr_block_update(const MarketInstance& inst,
                                             const Mat& b,
                                             const std::vector<double>& prices,
                                             int i, double alpha) {
  std::vector<double> row(inst.m, 0.0);
  double wsum = 0.0;
  for (int j = 0; j < inst.m; ++j) {
    const double bij = b(i, j);
    if (bij == 0.0) continue;
    const double g = std::pow(inst.valuations(i, j) / prices[j], alpha);
    const double w = bij * std::min(std::max(g, kReweightMin), kReweightMax);
    row[j] = w;
    wsum += w;
  }
  const double scale = inst.budgets[i] / wsum;
  for (int j = 0; j < inst.m; ++j) row[j] *= scale;
  detail::floor_support_bids(inst, b, i, row);
  return row;
}

// CES proportional response for one buyer: spend proportionally to the
// utility share v_ij (b_ij/p_j)^rho of each item.
inline std::vector<double> ces_block_update(const MarketInstance& inst,
                                            const Mat& b,
                                            const std::vector<double>& prices,
                                            int i) {
  std::vector<double> row(inst.m, 0.0);
  double tsum = 0.0;
  for (int j = 0; j < inst.m; ++j) {
    const double bij = b(i, j);
    if (bij == 0.0) continue;
    const double t =
        inst.valuations(i, j) * std::pow(bij / prices[j], inst.rho);
    row[j] = t;
    tsum += t;
  }
  const double scale = inst.budgets[i] / tsum;
  for (int j = 0; j < inst.m; ++j) row[j] *= scale;
  detail::floor_support_bids(inst, b, i, row);
  return row;
}

namespace detail {

inline void refresh_prices(PrSolverState& st, const MarketInstance& inst) {
  double drift = 0.0;
  for (int j = 0; j < inst.m; ++j) {
    double s = 0.0;
    for (int i = 0; i < inst.n; ++i) s += st.b(i, j);
    drift = std::max(drift, std::abs(st.prices[j] - s));
    st.prices[j] = s;
  }
  st.last_refresh_drift = drift;
  st.updates_since_refresh = 0;
}

inline void commit_row(PrSolverState& st, const MarketInstance& inst, int i,
                       const std::vector<double>& row) {
  for (int j = 0; j < inst.m; ++j) {
    st.prices[j] += row[j] - st.b(i, j);
    st.b(i, j) = row[j];
  }
  if (++st.updates_since_refresh >= kCacheRefreshPeriod)
    refresh_prices(st, inst);
}

// KL divergence between aligned nonnegative vectors with equal sums
// (budget rows or price vectors), so the affine terms cancel.
inline double kl_div(const std::vector<double>& a,
                     const std::vector<double>& c) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] > 0.0) d += a[k] * std::log(a[k] / c[k]);
  return d;
}

}  // namespace detail

// One sampled-buyer proportional response step at alpha = 1 (the unit
// relative-smoothness stepsize). Charges m accesses.
inline void bcpr_step(PrSolverState& st, const MarketInstance& inst) {
  const int i = static_cast<int>(st.rng.bounded(inst.n));
  const std::vector<double> row = bcpr_block_update(inst, st.b, st.prices, i, 1.0);
  detail::commit_row(st, inst, i, row);
  st.work += inst.m;
}

inline void bcpr_ces_step(PrSolverState& st, const MarketInstance& inst) {
  const int i = static_cast<int>(st.rng.bounded(inst.n));
  const std::vector<double> row = ces_block_update(inst, st.b, st.prices, i);
  detail::commit_row(st, inst, i, row);
  st.work += inst.m;
}

// Sampled-buyer step with per-buyer stepsize search. The tested step uses
// (1-delta) alpha_i; the certificate alpha_i * KL(p+, p) <= KL(b+_i, b_i)
// holds for alpha_i = 1 unconditionally (price KL never exceeds bid KL), so
// shrinking floors at 1. Charges m accesses per trial.
inline void bcpr_ls_step(PrSolverState& st, const MarketInstance& inst) {
  const int i = static_cast<int>(st.rng.bounded(inst.n));
  double alpha = st.alpha[i];
  std::vector<double> row, oldrow(inst.m);
  for (int j = 0; j < inst.m; ++j) oldrow[j] = st.b(i, j);
  for (;;) {
    row = bcpr_block_update(inst, st.b, st.prices, i,
                            (1.0 - st.params.delta) * alpha);
    st.work += inst.m;
    double d_b = 0.0, d_p = 0.0;
    for (int j = 0; j < inst.m; ++j) {
      if (oldrow[j] == 0.0) continue;
      d_b += row[j] * std::log(row[j] / oldrow[j]);
      const double pj = st.prices[j] + row[j] - oldrow[j];
      d_p += pj * std::log(pj / st.prices[j]);
    }
    if (alpha * d_p > d_b && alpha > 1.0) {
      alpha = std::max(st.params.shrink * alpha, 1.0);
      continue;
    }
    break;
  }
  detail::commit_row(st, inst, i, row);
  // Cap the stored stepsize: rows at their response fixed point have
  // d_p == 0, so any alpha certifies and uncapped growth diverges, poisoning
  // the first step after the row wakes up again.
  st.alpha[i] = std::min(st.params.grow * alpha, st.params.alpha_max);
}

// Sampled-buyer step with the closed-form adaptive stepsize: when the
// bang-per-buck spread beta_i (raised to alpha_bar) is at most sqrt(2), a
// local relative-smoothness bound L_i certifies alpha_i = 1/L_i; otherwise
// fall back to the always-safe alpha_i = 1. Charges m accesses.
inline void abcpr_step(PrSolverState& st, const MarketInstance& inst) {
  const int i = static_cast<int>(st.rng.bounded(inst.n));
  double rmax = 0.0, rmin = 0.0, theta = 0.0;
  for (int j = 0; j < inst.m; ++j) {
    if (inst.valuations(i, j) <= 0.0) continue;
    const double r = inst.valuations(i, j) / st.prices[j];
    rmax = std::max(rmax, r);
    rmin = rmin == 0.0 ? r : std::min(rmin, r);
    theta = std::max(theta, st.b(i, j) / st.prices[j]);
  }
  const double beta = std::pow(rmax / rmin, st.params.alpha_bar);
  double alpha = 1.0;
  if (beta <= std::sqrt(2.0)) {
    const double li = 3.0 / (4.0 - beta) *
                      (theta + (2.0 * beta - 1.0) / (6.0 * beta) * theta * theta);
    alpha = std::min(std::max(1.0 / li, 1.0), st.params.alpha_bar);
  }
  st.alpha[i] = alpha;
  const std::vector<double> row = bcpr_block_update(inst, st.b, st.prices, i, alpha);
  detail::commit_row(st, inst, i, row);
  st.work += inst.m;
}

// Deterministic full proportional response: every row responds to the same
// price snapshot, then prices are recomputed exactly. Charges n*m accesses.
inline void pr_step(PrSolverState& st, const MarketInstance& inst) {
  Mat bn(inst.n, inst.m);
  for (int i = 0; i < inst.n; ++i) {
    const std::vector<double> row = bcpr_block_update(inst, st.b, st.prices, i, 1.0);
    for (int j = 0; j < inst.m; ++j) bn(i, j) = row[j];
  }
  st.b = bn;
  detail::refresh_prices(st, inst);
  st.work += static_cast<long long>(inst.n) * inst.m;
}

inline void pr_ces_step(PrSolverState& st, const MarketInstance& inst) {
  Mat bn(inst.n, inst.m);
  for (int i = 0; i < inst.n; ++i) {
    const std::vector<double> row = ces_block_update(inst, st.b, st.prices, i);
    for (int j = 0; j < inst.m; ++j) bn(i, j) = row[j];
  }
  st.b = bn;
  detail::refresh_prices(st, inst);
  st.work += static_cast<long long>(inst.n) * inst.m;
}

// Full mirror-descent step with sufficient-decrease backtracking: grow the
// stepsize (up to alpha_max) after a clean iteration, then shrink until
// phi(b+) <= phi(b) + <grad phi(b), b+ - b> + KL(b+, b)/alpha. alpha <= 1
// always certifies, so the loop terminates; the tiny slack absorbs roundoff
// when b+ ~ b at high accuracy. Charges n*m accesses per trial.
inline void prls_step(PrSolverState& st, const MarketInstance& inst) {
  const int n = inst.n, m = inst.m;
  if (st.md_backtracks == 0)
    st.md_alpha = std::min(st.params.grow * st.md_alpha, st.params.alpha_max);
  double alpha = st.md_alpha;

  const double phi0 = shmyrev_objective(inst, st.b);
  Mat grad(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (st.b(i, j) > 0.0)
        grad(i, j) = 1.0 - std::log(inst.valuations(i, j) / st.prices[j]);

  const double slack = 1e-12 * std::max(1.0, std::abs(phi0));
  Mat bt(n, m);
  std::vector<double> pt(m);
  int backtracks = 0;
  for (;;) {
    for (int i = 0; i < n; ++i) {
      const std::vector<double> row = bcpr_block_update(inst, st.b, st.prices, i, alpha);
      for (int j = 0; j < m; ++j) bt(i, j) = row[j];
    }
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += bt(i, j);
      pt[j] = s;
    }
    double phi_t = 0.0, lin = 0.0, dkl = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const double bij = bt(i, j);
        if (bij == 0.0) continue;
        phi_t -= bij * std::log(inst.valuations(i, j) / pt[j]);
        lin += grad(i, j) * (bij - st.b(i, j));
        dkl += bij * std::log(bij / st.b(i, j));
      }
    st.work += static_cast<long long>(n) * m;
    if (phi_t <= phi0 + lin + dkl / alpha + slack) break;
    alpha *= st.params.shrink;
    if (++backtracks > 60)
      throw std::logic_error("prls_step: line search failed to terminate");
  }

  st.b = bt;
  st.prices = pt;
  st.md_alpha = alpha;
  st.md_backtracks = backtracks;
}

}  // namespace fisher

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fisher/eg.hpp"
#include "fisher/market.hpp"
#include "fisher/rng.hpp"
#include "fisher/simplex.hpp"

namespace fisher {

// Multiplicative line-search policy: shrink on a failed curvature test
// (never below the certified 1/L floor), grow after every committed step.
struct EgLineSearch {
  double shrink = 0.5;
  double grow = 1.02;
};

// Forced full recomputation period for incrementally-maintained caches
// (utilities here, prices on the bid side), bounding drift accumulation.
inline constexpr long long kCacheRefreshPeriod = 1000;

struct EgSolverState {
  Mat x;                          // allocation, every column on the simplex
  std::vector<double> cached_u;   // extrapolated utilities of x
  std::vector<double> eta;        // per-block stepsizes
  double eta_full = 0.0;          // full-gradient stepsize
  Rng rng;
  long long work = 0;             // valuation-matrix accesses charged so far
  EgLineSearch ls;
  long long updates_since_refresh = 0;
  double last_refresh_drift = 0.0;

  // Committed full gradient carried to the next iteration so a clean
  // full-gradient iteration charges exactly one n*m evaluation.
  Mat full_grad;
  bool full_grad_valid = false;

  // Optional audit: route every block projection through clearing_step and
  // record how well the demand identity holds.
  bool audit_clearing = false;
  long long audit_steps = 0;
  double audit_max_clear_err = 0.0;  // max |sum_i D_i - 1|
  bool audit_bitwise_ok = true;      // demands == projection output, bit for bit

  EgSolverState(int n, int m, std::uint64_t seed) : x(n, m), rng(seed) {}
};

// Uniform start x_ij = 1/n: every column is the simplex barycenter, so the
// point is feasible and every utility is positive.
inline EgSolverState init_allocation(const MarketInstance& inst,
                                     const ExtrapolationBounds& bounds,
                                     const LipschitzProfile& prof,
                                     std::uint64_t seed) {
  EgSolverState st(inst.n, inst.m, seed);
  const double share = 1.0 / inst.n;
  for (double& v : st.x.a) v = share;
  st.cached_u = extrapolated_utilities(inst, bounds, st.x);
  st.eta.assign(inst.m, 0.0);
  for (int j = 0; j < inst.m; ++j)
    if (prof.per_block[j] > 0.0) st.eta[j] = 1.0 / prof.per_block[j];
  if (prof.global > 0.0) st.eta_full = 1.0 / prof.global;
  return st;
}

namespace detail {

inline void refresh_cached_utilities(EgSolverState& st,
                                     const MarketInstance& inst,
                                     const ExtrapolationBounds& bounds) {
  const std::vector<double> exact = extrapolated_utilities(inst, bounds, st.x);
  double drift = 0.0;
  for (int i = 0; i < inst.n; ++i)
    drift = std::max(drift, std::abs(st.cached_u[i] - exact[i]) /
                                std::max(1.0, std::abs(exact[i])));
  st.cached_u = exact;
  st.last_refresh_drift = drift;
  st.updates_since_refresh = 0;
}

inline void note_block_update(EgSolverState& st, const MarketInstance& inst,
                              const ExtrapolationBounds& bounds) {
  if (++st.updates_since_refresh >= kCacheRefreshPeriod)
    refresh_cached_utilities(st, inst, bounds);
}

inline int sample_block(EgSolverState& st, const LipschitzProfile& prof) {
  if (prof.active.empty())
    throw std::logic_error("eg solver: no item block is updatable");
  return prof.active[st.rng.bounded(prof.active.size())];
}

}  // namespace detail

// One block coordinate step at the fixed stepsize eta_j = 1/L_j: project
// x_j - eta_j grad_j onto the item simplex and patch the cached utilities
// with the column's utility delta. Charges n accesses (one block gradient).
inline void bcdeg_step(EgSolverState& st, const MarketInstance& inst,
                       const ExtrapolationBounds& bounds,
                       const LipschitzProfile& prof) {
  const int n = inst.n;
  const int j = detail::sample_block(st, prof);
  std::vector<double> grad;
  eg_block_gradient(inst, bounds, st.x, j, st.cached_u, grad);
  st.work += n;

  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = st.x(i, j) - st.eta[j] * grad[i];
  std::vector<double> xp = project_simplex(y);

  if (st.audit_clearing) {
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) col[i] = st.x(i, j);
    const ClearingResult cr = clearing_step(col, grad, st.eta[j]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sum += cr.demands[i];
      if (cr.demands[i] != xp[i]) st.audit_bitwise_ok = false;
    }
    st.audit_max_clear_err =
        std::max(st.audit_max_clear_err, std::abs(sum - 1.0));
    ++st.audit_steps;
  }

  for (int i = 0; i < n; ++i) {
    st.cached_u[i] += utility_term(inst, bounds, i, j, xp[i]) -
                      utility_term(inst, bounds, i, j, st.x(i, j));
    st.x(i, j) = xp[i];
  }
  detail::note_block_update(st, inst, bounds);
}

// Block step with the two-point curvature test: accept the tentative
// projection iff eta * |grad(x+) - grad(x)| <= |x+ - x| over the block,
// shrinking toward the certified floor 1/L_j otherwise. Every gradient
// evaluation (initial and per trial) charges n accesses.
inline void bcdeg_ls_step(EgSolverState& st, const MarketInstance& inst,
                          const ExtrapolationBounds& bounds,
                          const LipschitzProfile& prof) {
  const int n = inst.n;
  const int j = detail::sample_block(st, prof);
  const double floor = 1.0 / prof.per_block[j];

  std::vector<double> grad;
  eg_block_gradient(inst, bounds, st.x, j, st.cached_u, grad);
  st.work += n;

  double eta = st.eta[j];
  std::vector<double> y(n), xp, u_trial(n), grad_trial(n);
  for (;;) {
    for (int i = 0; i < n; ++i) y[i] = st.x(i, j) - eta * grad[i];
    xp = project_simplex(y);

    for (int i = 0; i < n; ++i)
      u_trial[i] = st.cached_u[i] +
                   utility_term(inst, bounds, i, j, xp[i]) -
                   utility_term(inst, bounds, i, j, st.x(i, j));
    eg_block_gradient(inst, bounds, xp, j, u_trial, grad_trial);
    st.work += n;

    double gdiff = 0.0, xdiff = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dg = grad_trial[i] - grad[i];
      const double dx = xp[i] - st.x(i, j);
      gdiff += dg * dg;
      xdiff += dx * dx;
    }
    if (eta * std::sqrt(gdiff) > std::sqrt(xdiff) && eta > floor) {
      eta = std::max(st.ls.shrink * eta, floor);
      continue;
    }
    break;
  }

  for (int i = 0; i < n; ++i) st.x(i, j) = xp[i];
  st.cached_u = u_trial;
  st.eta[j] = st.ls.grow * eta;
  detail::note_block_update(st, inst, bounds);
}

namespace detail {

inline void eg_full_gradient(const MarketInstance& inst,
                             const ExtrapolationBounds& bounds, const Mat& x,
                             const std::vector<double>& u, Mat& g) {
  g = Mat(inst.n, inst.m);
  std::vector<double> col;
  for (int j = 0; j < inst.m; ++j) {
    eg_block_gradient(inst, bounds, x, j, u, col);
    for (int i = 0; i < inst.n; ++i) g(i, j) = col[i];
  }
}

}  // namespace detail

// Full projected gradient step with the same curvature test over the whole
// matrix (Frobenius norms, global L floor). The committed trial gradient is
// kept as the next iteration's base gradient, so a clean iteration charges
// one full evaluation (n*m); each retry charges another.
inline void pgls_step(EgSolverState& st, const MarketInstance& inst,
                      const ExtrapolationBounds& bounds,
                      const LipschitzProfile& prof) {
  const int n = inst.n, m = inst.m;
  const double floor = 1.0 / prof.global;
  if (!st.full_grad_valid) {
    detail::eg_full_gradient(inst, bounds, st.x, st.cached_u, st.full_grad);
    st.full_grad_valid = true;
    st.work += static_cast<long long>(n) * m;
  }

  double eta = st.eta_full;
  Mat xp(n, m), grad_trial;
  std::vector<double> y(n), u_trial;
  for (;;) {
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) y[i] = st.x(i, j) - eta * st.full_grad(i, j);
      const std::vector<double> pj = project_simplex(y);
      for (int i = 0; i < n; ++i) xp(i, j) = pj[i];
    }
    u_trial = extrapolated_utilities(inst, bounds, xp);
    detail::eg_full_gradient(inst, bounds, xp, u_trial, grad_trial);
    st.work += static_cast<long long>(n) * m;

    double gdiff = 0.0, xdiff = 0.0;
    for (std::size_t k = 0; k < xp.a.size(); ++k) {
      const double dg = grad_trial.a[k] - st.full_grad.a[k];
      const double dx = xp.a[k] - st.x.a[k];
      gdiff += dg * dg;
      xdiff += dx * dx;
    }
    if (eta * std::sqrt(gdiff) > std::sqrt(xdiff) && eta > floor) {
      eta = std::max(st.ls.shrink * eta, floor);
      continue;
    }
    break;
  }

  st.x = xp;
  st.cached_u = u_trial;
  st.full_grad = grad_trial;
  st.eta_full = st.ls.grow * eta;
}

}  // namespace fisher

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "fisher/market.hpp"

namespace fisher {

// Utility floors below which the EG objective is replaced by its quadratic
// C^1 extension. u_lower[i] is the utility of the proportional allocation
// x_ij = B_i / sum_l B_l (linear) or of the CES floor allocation x_lower[i]
// (every optimal allocation stays above these, so the extension never binds
// at a solution; it only tames the curvature far from one).
struct ExtrapolationBounds {
  std::vector<double> u_lower;
  std::vector<double> x_lower;  // CES only: per-buyer coordinate floor
};

inline ExtrapolationBounds extrapolation_bounds(const MarketInstance& inst) {
  ExtrapolationBounds b;
  b.u_lower.resize(inst.n);
  const double total = inst.total_budget();
  if (inst.utility == Utility::Linear) {
    for (int i = 0; i < inst.n; ++i) {
      double vsum = 0.0;
      for (int j = 0; j < inst.m; ++j) vsum += inst.valuations(i, j);
      b.u_lower[i] = inst.budgets[i] / total * vsum;
      if (!(b.u_lower[i] > 0.0))
        throw std::invalid_argument("extrapolation_bounds: buyer values no item");
    }
  } else {
    b.x_lower.resize(inst.n);
    for (int i = 0; i < inst.n; ++i) {
      double vmax = 0.0, vmin_pos = 0.0, vsupp = 0.0;
      for (int j = 0; j < inst.m; ++j) {
        const double v = inst.valuations(i, j);
        vmax = std::max(vmax, v);
        if (v > 0.0) {
          vmin_pos = vmin_pos == 0.0 ? v : std::min(vmin_pos, v);
          vsupp += v;
        }
      }
      if (!(vmax > 0.0))
        throw std::invalid_argument("extrapolation_bounds: buyer values no item");
      const double w1 = inst.budgets[i] / (inst.m * total);
      const double w2 = vmin_pos / vmax;
      const double r = inst.rho;
      b.x_lower[i] = std::pow(w1, 1.0 / (1.0 - r)) *
                     std::pow(w2, r * (r + 1.0) / (1.0 - r));
      b.u_lower[i] = std::pow(b.x_lower[i], r) * vsupp;
    }
  }
  return b;
}

// g(u) = -B log u continued below u_lower by its second-order Taylor
// polynomial at u_lower; values and derivatives match there, and the
// curvature is frozen at B/u_lower^2 so g stays convex and globally smooth.
inline double gtilde(double budget, double u_lower, double u) {
  if (u >= u_lower) return -budget * std::log(u);
  const double d = u - u_lower;
  return -budget * std::log(u_lower) - budget / u_lower * d +
         budget / (2.0 * u_lower * u_lower) * d * d;
}

inline double gtilde_deriv(double budget, double u_lower, double u) {
  if (u >= u_lower) return -budget / u;
  return -budget / u_lower + budget / (u_lower * u_lower) * (u - u_lower);
}

// Per-coordinate CES utility term v x^rho, continued below x_lower by its
// quadratic Taylor polynomial there (x^(rho-2) blows up at 0 otherwise).
inline double ces_term(double v, double rho, double x_lower, double x) {
  if (x >= x_lower) return v * std::pow(x, rho);
  const double d = x - x_lower;
  const double p = std::pow(x_lower, rho);
  return v * p + rho * v * p / x_lower * d +
         0.5 * rho * (rho - 1.0) * v * p / (x_lower * x_lower) * d * d;
}

inline double ces_term_deriv(double v, double rho, double x_lower, double x) {
  if (x >= x_lower) return rho * v * std::pow(x, rho - 1.0);
  const double p = std::pow(x_lower, rho);
  return rho * v * p / x_lower +
         rho * (rho - 1.0) * v * p / (x_lower * x_lower) * (x - x_lower);
}

// Extrapolated utility of one allocation entry as seen by the objective.
inline double utility_term(const MarketInstance& inst,
                           const ExtrapolationBounds& bounds, int i, int j,
                           double xij) {
  const double v = inst.valuations(i, j);
  if (inst.utility == Utility::Linear) return v * xij;
  if (v == 0.0) return 0.0;
  return ces_term(v, inst.rho, bounds.x_lower[i], xij);
}

inline std::vector<double> extrapolated_utilities(
    const MarketInstance& inst, const ExtrapolationBounds& bounds,
    const Mat& x) {
  std::vector<double> u(inst.n, 0.0);
  for (int i = 0; i < inst.n; ++i) {
    double s = 0.0;
    for (int j = 0; j < inst.m; ++j) s += utility_term(inst, bounds, i, j, x(i, j));
    u[i] = s;
  }
  return u;
}

// Smoothed EG objective f(x) = sum_i g_i(u_i(x)) to be minimized over the
// product of item simplices. The CES branch scales by B_i/rho so that the
// minimizer matches max sum_i (B_i/rho) log u_i(rho).
inline double eg_objective_from_utilities(const MarketInstance& inst,
                                          const ExtrapolationBounds& bounds,
                                          const std::vector<double>& u) {
  double f = 0.0;
  const double scale = inst.utility == Utility::Ces ? 1.0 / inst.rho : 1.0;
  for (int i = 0; i < inst.n; ++i)
    f += gtilde(inst.budgets[i] * scale, bounds.u_lower[i], u[i]);
  return f;
}

inline double eg_objective(const MarketInstance& inst,
                           const ExtrapolationBounds& bounds, const Mat& x) {
  return eg_objective_from_utilities(inst, bounds,
                                     extrapolated_utilities(inst, bounds, x));
}

// Gradient of the objective restricted to item column j, given that column
// of the point and the (cached) extrapolated utilities. Linear:
// g_i'(u_i) v_ij. CES: g_i'(u_i) times the extrapolated per-coordinate
// derivative at x_ij.
inline void eg_block_gradient(const MarketInstance& inst,
                              const ExtrapolationBounds& bounds,
                              std::span<const double> x_column, int j,
                              const std::vector<double>& u,
                              std::vector<double>& grad) {
  grad.resize(inst.n);
  const double scale = inst.utility == Utility::Ces ? 1.0 / inst.rho : 1.0;
  for (int i = 0; i < inst.n; ++i) {
    const double gd =
        gtilde_deriv(inst.budgets[i] * scale, bounds.u_lower[i], u[i]);
    const double v = inst.valuations(i, j);
    if (inst.utility == Utility::Linear) {
      grad[i] = gd * v;
    } else {
      grad[i] = v == 0.0 ? 0.0
                         : gd * ces_term_deriv(v, inst.rho, bounds.x_lower[i],
                                               x_column[i]);
    }
  }
}

inline void eg_block_gradient(const MarketInstance& inst,
                              const ExtrapolationBounds& bounds, const Mat& x,
                              int j, const std::vector<double>& u,
                              std::vector<double>& grad) {
  std::vector<double> col(inst.n);
  for (int i = 0; i < inst.n; ++i) col[i] = x(i, j);
  eg_block_gradient(inst, bounds, col, j, u, grad);
}

// Per-item-block and full-gradient smoothness constants of the smoothed
// objective. Degenerate all-zero columns (rejected by validate, but kept
// representable) get L_j = 0; solvers must not sample those blocks.
struct LipschitzProfile {
  std::vector<double> per_block;
  double global = 0.0;
  std::vector<int> active;  // columns with per_block > 0
};

inline LipschitzProfile lipschitz_profile(const MarketInstance& inst,
                                          const ExtrapolationBounds& bounds) {
  LipschitzProfile prof;
  prof.per_block.assign(inst.m, 0.0);
  if (inst.utility == Utility::Linear) {
    for (int j = 0; j < inst.m; ++j) {
      double lj = 0.0;
      for (int i = 0; i < inst.n; ++i) {
        const double v = inst.valuations(i, j);
        lj = std::max(lj, inst.budgets[i] * v * v /
                              (bounds.u_lower[i] * bounds.u_lower[i]));
      }
      prof.per_block[j] = lj;
    }
    for (int i = 0; i < inst.n; ++i) {
      double norm2 = 0.0;
      for (int j = 0; j < inst.m; ++j) {
        const double v = inst.valuations(i, j);
        norm2 += v * v;
      }
      prof.global = std::max(prof.global,
                             inst.budgets[i] * norm2 /
                                 (bounds.u_lower[i] * bounds.u_lower[i]));
    }
  } else {
    for (int j = 0; j < inst.m; ++j) {
      double lj = 0.0;
      for (int i = 0; i < inst.n; ++i) {
        const double v = inst.valuations(i, j);
        if (v == 0.0) continue;
        lj = std::max(lj, inst.budgets[i] * v *
                              std::pow(bounds.x_lower[i], inst.rho - 2.0) /
                              bounds.u_lower[i]);
      }
      prof.per_block[j] = lj;
    }
    // No full-gradient CES solver consumes this; the block sum is a valid
    // (loose) bound and keeps the field meaningful.
    for (double lj : prof.per_block) prof.global += lj;
  }
  for (int j = 0; j < inst.m; ++j)
    if (prof.per_block[j] > 0.0) prof.active.push_back(j);
  return prof;
}

}  // namespace fisher

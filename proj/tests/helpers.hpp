#pragma once

#include <cmath>
#include <vector>

#include "fisher/eg.hpp"
#include "fisher/instances.hpp"
#include "fisher/market.hpp"
#include "fisher/rng.hpp"

namespace testutil {

// Random point of the d-simplex: exponential draws renormalized (Dirichlet(1)).
inline std::vector<double> random_simplex_point(fisher::Rng& rng, int d) {
  std::vector<double> x(d);
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    x[i] = -std::log(rng.uniform_pos());
    s += x[i];
  }
  for (int i = 0; i < d; ++i) x[i] /= s;
  return x;
}

// Feasible allocation: every item column uniformly random on the simplex.
inline fisher::Mat random_allocation(fisher::Rng& rng, int n, int m) {
  fisher::Mat x(n, m);
  for (int j = 0; j < m; ++j) {
    const std::vector<double> col = random_simplex_point(rng, n);
    for (int i = 0; i < n; ++i) x(i, j) = col[i];
  }
  return x;
}

// Central finite difference of the smoothed objective at one coordinate.
inline double fd_gradient_entry(const fisher::MarketInstance& inst,
                                const fisher::ExtrapolationBounds& bounds,
                                fisher::Mat x, int i, int j, double h) {
  const double base = x(i, j);
  x(i, j) = base + h;
  const double fp = fisher::eg_objective(inst, bounds, x);
  x(i, j) = base - h;
  const double fm = fisher::eg_objective(inst, bounds, x);
  return (fp - fm) / (2.0 * h);
}

inline fisher::MarketInstance small_random_instance(std::uint64_t seed,
                                                    fisher::Utility kind,
                                                    int n, int m,
                                                    double rho = 0.5) {
  fisher::GeneratorSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.m = m;
  spec.seed = seed;
  spec.rho = rho;
  return fisher::generate_low_rank(spec);
}

}  // namespace testutil

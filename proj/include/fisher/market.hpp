#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fisher {

// Dense row-major matrix of doubles. All instances in scope are dense
// (low-rank-plus-noise generator fills every entry), so no sparse path.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }

  bool operator==(const Mat&) const = default;
};

enum class Utility { Linear, Ces };

// Fisher market: n buyers with budgets B_i > 0 spend on m divisible items
// with unit supply. Buyer i's utility is <v_i, x_i> (linear) or the CES form
// with elasticity parameter rho in (0,1); CES code paths work with the inner
// sum sum_j v_ij x_ij^rho and apply the 1/rho power only when reporting.
struct MarketInstance {
  int n = 0;
  int m = 0;
  std::vector<double> budgets;  // size n, all > 0
  Mat valuations;               // n x m, entries >= 0
  Utility utility = Utility::Linear;
  double rho = 0.0;  // meaningful iff utility == Ces

  double total_budget() const {
    double s = 0.0;
    for (double b : budgets) s += b;
    return s;
  }
};

// Enforces the representation invariants. Callers constructing instances by
// hand may skip this; loaders and generators must not.
inline void validate(const MarketInstance& inst) {
  if (inst.n <= 0 || inst.m <= 0)
    throw std::invalid_argument("market: n and m must be positive");
  if (static_cast<int>(inst.budgets.size()) != inst.n)
    throw std::invalid_argument("market: budget vector size mismatch");
  if (inst.valuations.rows != inst.n || inst.valuations.cols != inst.m)
    throw std::invalid_argument("market: valuation matrix shape mismatch");
  for (double b : inst.budgets)
    if (!(b > 0.0) || !std::isfinite(b))
      throw std::invalid_argument("market: budgets must be positive finite");
  for (double v : inst.valuations.a)
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument("market: valuations must be >= 0 finite");
  for (int i = 0; i < inst.n; ++i) {
    bool any = false;
    for (int j = 0; j < inst.m; ++j) any = any || inst.valuations(i, j) > 0.0;
    if (!any)
      throw std::invalid_argument("market: buyer " + std::to_string(i) +
                                  " values no item");
  }
  for (int j = 0; j < inst.m; ++j) {
    bool any = false;
    for (int i = 0; i < inst.n; ++i) any = any || inst.valuations(i, j) > 0.0;
    if (!any)
      throw std::invalid_argument("market: item " + std::to_string(j) +
                                  " valued by no buyer");
  }
  if (inst.utility == Utility::Ces) {
    if (!(inst.rho > 0.0) || !(inst.rho < 1.0))
      throw std::invalid_argument("market: CES needs rho in (0,1)");
  }
}

// True utilities of an allocation. Linear: u_i = <v_i, x_i>. CES: the inner
// sum u_i(rho) = sum_j v_ij x_ij^rho (not raised to 1/rho).
inline std::vector<double> compute_utilities(const MarketInstance& inst,
                                             const Mat& x) {
  if (x.rows != inst.n || x.cols != inst.m)
    throw std::invalid_argument("compute_utilities: allocation shape mismatch");
  std::vector<double> u(inst.n, 0.0);
  if (inst.utility == Utility::Linear) {
    for (int i = 0; i < inst.n; ++i) {
      double s = 0.0;
      for (int j = 0; j < inst.m; ++j) s += inst.valuations(i, j) * x(i, j);
      u[i] = s;
    }
  } else {
    for (int i = 0; i < inst.n; ++i) {
      double s = 0.0;
      for (int j = 0; j < inst.m; ++j) {
        const double v = inst.valuations(i, j);
        if (v > 0.0) s += v * std::pow(x(i, j), inst.rho);
      }
      u[i] = s;
    }
  }
  return u;
}

// Utilities as reported to users: the CES value is the 1/rho power of the
// inner sum so cross-family comparisons see the actual CES utility.
inline std::vector<double> reported_utilities(const MarketInstance& inst,
                                              const Mat& x) {
  std::vector<double> u = compute_utilities(inst, x);
  if (inst.utility == Utility::Ces)
    for (double& ui : u) ui = std::pow(ui, 1.0 / inst.rho);
  return u;
}

}  // namespace fisher

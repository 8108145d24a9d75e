#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fisher/eg.hpp"
#include "fisher/market.hpp"
#include "helpers.hpp"

using namespace fisher;

namespace {

MarketInstance linear_2x2() {
  MarketInstance inst;
  inst.n = 2;
  inst.m = 2;
  inst.budgets = {1.0, 1.0};
  inst.valuations = Mat(2, 2);
  inst.valuations(0, 0) = 1.0;
  inst.valuations(0, 1) = 3.0;
  inst.valuations(1, 0) = 2.0;
  inst.valuations(1, 1) = 2.0;
  return inst;
}

MarketInstance ces_1x2() {
  MarketInstance inst;
  inst.n = 1;
  inst.m = 2;
  inst.budgets = {1.0};
  inst.valuations = Mat(1, 2, 1.0);
  inst.utility = Utility::Ces;
  inst.rho = 0.5;
  return inst;
}

}  // namespace

TEST_CASE("proportional-share utility floors, linear") {
  const auto b = extrapolation_bounds(linear_2x2());
  CHECK(b.u_lower[0] == Catch::Approx(2.0).margin(1e-15));
  CHECK(b.u_lower[1] == Catch::Approx(2.0).margin(1e-15));
  CHECK(b.x_lower.empty());
}

TEST_CASE("coordinate and utility floors, ces") {
  const auto b = extrapolation_bounds(ces_1x2());
  // w1 = 1/2, w2 = 1, rho = 1/2: x floor = (1/2)^2
  CHECK(b.x_lower[0] == Catch::Approx(0.25).margin(1e-15));
  CHECK(b.u_lower[0] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("log branch and quadratic branch of the smoothed penalty") {
  CHECK(gtilde(1.0, 2.0, 3.0) == -std::log(3.0));
  // at u = 0: -log 2 + 1 + 1/2
  CHECK(gtilde(1.0, 2.0, 0.0) ==
        Catch::Approx(1.5 - std::log(2.0)).margin(1e-15));
  // C1 junction
  const double ul = 0.7, B = 1.3;
  CHECK(gtilde(B, ul, ul) == Catch::Approx(-B * std::log(ul)).margin(1e-15));
  const double h = 1e-7;
  CHECK(gtilde(B, ul, ul - h) - gtilde(B, ul, ul) ==
        Catch::Approx(-(-B / ul) * h).epsilon(1e-3).margin(1e-12));
  CHECK(gtilde_deriv(B, ul, ul) == -B / ul);
  CHECK(gtilde_deriv(B, ul, ul - 1e-12) ==
        Catch::Approx(-B / ul).margin(1e-9));
  // derivative matches finite differences on both branches
  for (double u : {0.1, 0.3, 0.69, 0.71, 1.5, 4.0}) {
    const double fd = (gtilde(B, ul, u + h) - gtilde(B, ul, u - h)) / (2 * h);
    CHECK(gtilde_deriv(B, ul, u) == Catch::Approx(fd).epsilon(1e-6));
  }
  // convexity: secant slopes increase
  double prev = -1e300;
  for (double u = 0.05; u < 2.0; u += 0.05) {
    const double slope = (gtilde(B, ul, u + 0.025) - gtilde(B, ul, u)) / 0.025;
    CHECK(slope >= prev);
    prev = slope;
  }
}

TEST_CASE("ces per-coordinate extension is C1 and matches finite differences") {
  const double v = 2.0, rho = 0.5, xl = 0.3;
  CHECK(ces_term(v, rho, xl, 1.0) == v);
  CHECK(ces_term(v, rho, xl, xl) ==
        Catch::Approx(v * std::pow(xl, rho)).margin(1e-15));
  const double h = 1e-7;
  for (double x : {0.0, 0.05, 0.29, 0.31, 0.5, 1.0, 2.0}) {
    const double xp = x == 0.0 ? h : x;  // stay in the domain for the stencil
    const double fd =
        (ces_term(v, rho, xl, xp + h) - ces_term(v, rho, xl, xp - h)) / (2 * h);
    CHECK(ces_term_deriv(v, rho, xl, xp) ==
          Catch::Approx(fd).epsilon(1e-5).margin(1e-8));
  }
  // the extension is increasing and positive at zero
  CHECK(ces_term(v, rho, xl, 0.0) > 0.0);
  CHECK(ces_term_deriv(v, rho, xl, 0.0) > 0.0);
}

TEST_CASE("objective values at hand-worked points") {
  {
    const auto inst = ces_1x2();
    const auto b = extrapolation_bounds(inst);
    Mat x(1, 2, 1.0);
    CHECK(eg_objective(inst, b, x) ==
          Catch::Approx(-2.0 * std::log(2.0)).margin(1e-14));
  }
  {
    MarketInstance inst;
    inst.n = 1;
    inst.m = 2;
    inst.budgets = {1.0};
    inst.valuations = Mat(1, 2);
    inst.valuations(0, 0) = 2.0;
    inst.valuations(0, 1) = 1.0;
    const auto b = extrapolation_bounds(inst);
    Mat x(1, 2, 1.0);
    CHECK(eg_objective(inst, b, x) == Catch::Approx(-std::log(3.0)).margin(1e-15));
  }
}

TEST_CASE("block gradient at a hand-worked point") {
  // single buyer, B = 1, v_j = 3, u = 2 above the floor: gradient -B v / u
  MarketInstance inst;
  inst.n = 1;
  inst.m = 2;
  inst.budgets = {1.0};
  inst.valuations = Mat(1, 2);
  inst.valuations(0, 0) = 3.0;
  inst.valuations(0, 1) = 1.0;
  ExtrapolationBounds b;
  b.u_lower = {1.0};
  std::vector<double> grad;
  Mat x(1, 2, 0.5);
  eg_block_gradient(inst, b, x, 0, {2.0}, grad);
  CHECK(grad[0] == -1.5);
}

TEST_CASE("block gradients agree with central differences") {
  Rng rng(42);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const Utility kind = trial % 2 ? Utility::Ces : Utility::Linear;
    const int n = 2 + static_cast<int>(rng.bounded(6));
    const int m = 2 + static_cast<int>(rng.bounded(6));
    const auto inst = testutil::small_random_instance(1000 + trial, kind, n, m);
    const auto bounds = extrapolation_bounds(inst);
    Mat x = testutil::random_allocation(rng, n, m);
    if (trial % 3 == 0)  // also probe the extrapolated region
      for (double& v : x.a) v *= 0.05;
    std::vector<double> grad;
    for (int j = 0; j < m; ++j) {
      eg_block_gradient(inst, bounds, x, j, extrapolated_utilities(inst, bounds, x), grad);
      for (int i = 0; i < n; ++i) {
        const double fd = testutil::fd_gradient_entry(inst, bounds, x, i, j, 1e-6);
        worst = std::max(worst,
                         std::abs(fd - grad[i]) / std::max(1.0, std::abs(grad[i])));
      }
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("per-block smoothness constants at hand-worked points") {
  const auto inst = linear_2x2();
  const auto b = extrapolation_bounds(inst);
  const auto prof = lipschitz_profile(inst, b);
  CHECK(prof.per_block[0] == Catch::Approx(1.0).margin(1e-15));
  CHECK(prof.per_block[1] == Catch::Approx(2.25).margin(1e-15));
  // global constant dominates every block and is at most n times the max
  double lmax = 0.0;
  for (double lj : prof.per_block) lmax = std::max(lmax, lj);
  CHECK(prof.global >= lmax - 1e-15);
  CHECK(prof.global <= inst.n * lmax + 1e-15);
  CHECK(prof.active == std::vector<int>{0, 1});
}

TEST_CASE("full-gradient smoothness constant, single buyer") {
  MarketInstance inst;
  inst.n = 1;
  inst.m = 2;
  inst.budgets = {1.0};
  inst.valuations = Mat(1, 2, 1.0);
  ExtrapolationBounds b;
  b.u_lower = {2.0};
  const auto prof = lipschitz_profile(inst, b);
  CHECK(prof.global == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("degenerate all-zero columns get a zero constant and are inactive") {
  auto inst = linear_2x2();
  inst.valuations(0, 1) = 0.0;
  inst.valuations(1, 1) = 0.0;  // bypasses validate on purpose
  const auto b = extrapolation_bounds(inst);
  const auto prof = lipschitz_profile(inst, b);
  CHECK(prof.per_block[1] == 0.0);
  CHECK(prof.active == std::vector<int>{0});
}

TEST_CASE("one-block smoothness certificates hold on random pairs") {
  Rng rng(2718);
  for (int family = 0; family < 2; ++family) {
    const Utility kind = family ? Utility::Ces : Utility::Linear;
    double worst = -1e300;
    for (int trial = 0; trial < 400; ++trial) {
      const int n = 2 + static_cast<int>(rng.bounded(5));
      const int m = 2 + static_cast<int>(rng.bounded(5));
      const auto inst = testutil::small_random_instance(7000 + trial, kind, n, m);
      const auto bounds = extrapolation_bounds(inst);
      const auto prof = lipschitz_profile(inst, bounds);
      Mat x = testutil::random_allocation(rng, n, m);
      const int j = static_cast<int>(rng.bounded(m));
      Mat y = x;
      const auto col = testutil::random_simplex_point(rng, n);
      for (int i = 0; i < n; ++i) y(i, j) = col[i];

      std::vector<double> grad;
      eg_block_gradient(inst, bounds, x, j, extrapolated_utilities(inst, bounds, x), grad);
      double lin = 0.0, dist2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = y(i, j) - x(i, j);
        lin += grad[i] * d;
        dist2 += d * d;
      }
      const double lhs = eg_objective(inst, bounds, y);
      const double rhs = eg_objective(inst, bounds, x) + lin +
                         0.5 * prof.per_block[j] * dist2;
      worst = std::max(worst, lhs - rhs);
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("full-gradient smoothness certificate holds on random pairs") {
  Rng rng(3141);
  double worst = -1e300;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.bounded(5));
    const int m = 2 + static_cast<int>(rng.bounded(5));
    const auto inst =
        testutil::small_random_instance(9000 + trial, Utility::Linear, n, m);
    const auto bounds = extrapolation_bounds(inst);
    const auto prof = lipschitz_profile(inst, bounds);
    const Mat x = testutil::random_allocation(rng, n, m);
    const Mat y = testutil::random_allocation(rng, n, m);

    const auto u = extrapolated_utilities(inst, bounds, x);
    std::vector<double> grad;
    double lin = 0.0, dist2 = 0.0;
    for (int j = 0; j < m; ++j) {
      eg_block_gradient(inst, bounds, x, j, u, grad);
      for (int i = 0; i < n; ++i) {
        const double d = y(i, j) - x(i, j);
        lin += grad[i] * d;
        dist2 += d * d;
      }
    }
    const double lhs = eg_objective(inst, bounds, y);
    const double rhs = eg_objective(inst, bounds, x) + lin + 0.5 * prof.global * dist2;
    worst = std::max(worst, lhs - rhs);
  }
  CHECK(worst <= 1e-9);
}

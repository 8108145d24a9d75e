#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "fisher/rng.hpp"
#include "fisher/simplex.hpp"

using namespace fisher;

namespace {

// Independent oracle: enumerate active sets. For each candidate support S
// the unconstrained minimizer is x_i = y_i - t with t = (sum_S y - 1)/|S|;
// it is the projection iff x >= 0 on S and y_i - t <= 0 off S. Exponential,
// fine for d <= 6.
std::vector<double> oracle_project(const std::vector<double>& y) {
  const int d = static_cast<int>(y.size());
  std::vector<double> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << d); ++mask) {
    double sum = 0.0;
    int k = 0;
    for (int i = 0; i < d; ++i)
      if (mask & (1u << i)) {
        sum += y[i];
        ++k;
      }
    const double t = (sum - 1.0) / k;
    bool ok = true;
    std::vector<double> x(d, 0.0);
    for (int i = 0; i < d; ++i) {
      if (mask & (1u << i)) {
        x[i] = y[i] - t;
        ok = ok && x[i] >= -1e-12;
      } else {
        ok = ok && y[i] - t <= 1e-12;
      }
    }
    if (!ok) continue;
    double dist = 0.0;
    for (int i = 0; i < d; ++i) dist += (x[i] - y[i]) * (x[i] - y[i]);
    if (dist < best_dist) {
      best_dist = dist;
      best = x;
    }
  }
  REQUIRE(!best.empty());
  return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("projection matches hand-worked cases") {
  {
    const std::vector<double> y = {0.3, 0.3, 0.4};  // already feasible
    const auto x = project_simplex(y);
    CHECK(simplex_threshold(y) == 0.0);
    CHECK(x[0] == 0.3);
    CHECK(x[1] == 0.3);
    CHECK(x[2] == 0.4);
  }
  {
    const std::vector<double> y = {0.5, 0.5, 0.5};
    const auto x = project_simplex(y);
    CHECK(simplex_threshold(y) == Catch::Approx(1.0 / 6.0).margin(1e-16));
    for (double xi : x) CHECK(xi == Catch::Approx(1.0 / 3.0).margin(1e-15));
  }
  {
    const std::vector<double> y = {1.2, 0.3, -0.5};
    CHECK(simplex_threshold(y) == Catch::Approx(0.25).margin(1e-15));
    const auto x = project_simplex(y);
    CHECK(x[0] == Catch::Approx(0.95).margin(1e-15));
    CHECK(x[1] == Catch::Approx(0.05).margin(1e-15));
    CHECK(x[2] == 0.0);
  }
}

TEST_CASE("projection rejects an empty vector") {
  CHECK_THROWS_AS(project_simplex(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("projection agrees with the active-set oracle") {
  Rng rng(31337);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 2 + static_cast<int>(rng.bounded(5));
    std::vector<double> y(d);
    const double scale = trial % 3 == 0 ? 10.0 : 1.0;
    for (double& v : y) v = rng.uniform(-2.0, 2.0) * scale;
    worst = std::max(worst, max_abs_diff(project_simplex(y), oracle_project(y)));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("projection output is feasible, idempotent, order preserving") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + static_cast<int>(rng.bounded(7));
    std::vector<double> y(d);
    for (double& v : y) v = rng.uniform(-3.0, 3.0);
    const auto x = project_simplex(y);
    double sum = 0.0;
    for (double xi : x) {
      REQUIRE(xi >= 0.0);
      sum += xi;
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-12);
    REQUIRE(max_abs_diff(project_simplex(x), x) <= 1e-15);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k)
        if (y[i] >= y[k]) REQUIRE(x[i] >= x[k]);
    // translation invariance along the all-ones direction
    std::vector<double> shifted(y);
    const double c = rng.uniform(-1.0, 1.0);
    for (double& v : shifted) v += c;
    REQUIRE(max_abs_diff(project_simplex(shifted), x) <= 1e-12);
  }
}

TEST_CASE("clearing step delegates to the projection bitwise") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + static_cast<int>(rng.bounded(5));
    std::vector<double> x(d), g(d);
    for (double& v : x) v = rng.uniform(0.0, 1.0);
    for (double& v : g) v = rng.uniform(-2.0, 2.0);
    const double eta = rng.uniform(0.01, 2.0);
    const auto r = clearing_step(x, g, eta);

    std::vector<double> y(d);
    for (int i = 0; i < d; ++i) y[i] = x[i] - eta * g[i];
    const auto proj = project_simplex(y);
    for (int i = 0; i < d; ++i) {
      REQUIRE(r.projected[i] == proj[i]);
      REQUIRE(r.demands[i] == proj[i]);
    }

    // the demand formula (x - eta g - eta price)_+ agrees up to roundoff
    double sum = 0.0;
    for (int i = 0; i < d; ++i) {
      const double formula = std::max(x[i] - eta * g[i] - eta * r.price, 0.0);
      REQUIRE(std::abs(formula - r.demands[i]) <= 1e-12);
      sum += r.demands[i];
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-10);
    REQUIRE(r.price == r.threshold / eta);
  }
}

TEST_CASE("clearing a feasible column with zero gradient is the identity") {
  const std::vector<double> x = {0.25, 0.25, 0.5};
  const std::vector<double> g = {0.0, 0.0, 0.0};
  const auto r = clearing_step(x, g, 0.7);
  CHECK(r.threshold == 0.0);
  CHECK(r.price == 0.0);
  for (int i = 0; i < 3; ++i) CHECK(r.demands[i] == x[i]);
}

TEST_CASE("clearing step validates its inputs") {
  const std::vector<double> x = {0.5, 0.5};
  const std::vector<double> g = {0.0};
  CHECK_THROWS_AS(clearing_step(x, g, 0.1), std::invalid_argument);
  const std::vector<double> g2 = {0.0, 0.0};
  CHECK_THROWS_AS(clearing_step(x, g2, 0.0), std::invalid_argument);
}

#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

namespace fisher {

// Threshold t such that sum_i max(y_i - t, 0) = 1. Sort ascending, then for
// each candidate active set {top k} solve for t and accept the first
// candidate that is consistent (t_k >= next-largest entry). O(d log d); the
// accepted t is the unique root, so ties in y are harmless.
inline double simplex_threshold(std::span<const double> y) {
  const int d = static_cast<int>(y.size());
  if (d == 0) throw std::invalid_argument("simplex_threshold: empty vector");
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  double tail = 0.0;  // sum of entries strictly above position i
  for (int i = d - 1; i >= 1; --i) {
    tail += s[i];
    const double t = (tail - 1.0) / static_cast<double>(d - i);
    if (t >= s[i - 1]) return t;
  }
  tail += s[0];
  return (tail - 1.0) / static_cast<double>(d);
}

// Euclidean projection onto the probability simplex: x = (y - t)_+ .
inline std::vector<double> project_simplex(std::span<const double> y) {
  const double t = simplex_threshold(y);
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    x[i] = std::max(y[i] - t, 0.0);
  return x;
}

// Market-clearing view of one projected gradient step on an item column.
// With y = x - eta*g the threshold t acts as eta times a clearing price:
// demands D_i = (x_i - eta g_i - eta p)_+ vanish exactly when the column
// sells out (sum_i D_i = 1). demands is definitionally the projection of y,
// shares its arithmetic bit for bit, and is returned in both fields.
struct ClearingResult {
  double price = 0.0;      // t / eta
  double threshold = 0.0;  // t
  std::vector<double> demands;
  std::vector<double> projected;
};

inline ClearingResult clearing_step(std::span<const double> x_column,
                                    std::span<const double> grad_column,
                                    double eta) {
  if (x_column.size() != grad_column.size())
    throw std::invalid_argument("clearing_step: column size mismatch");
  if (!(eta > 0.0)) throw std::invalid_argument("clearing_step: eta must be > 0");
  std::vector<double> y(x_column.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = x_column[i] - eta * grad_column[i];
  ClearingResult r;
  r.threshold = simplex_threshold(y);
  r.price = r.threshold / eta;
  r.projected.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    r.projected[i] = std::max(y[i] - r.threshold, 0.0);
  r.demands = r.projected;
  return r;
}

}  // namespace fisher

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "slepqns/errors.hpp"

namespace slepqns::detail {

struct RefinedQuadrature {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
  bool converged = false;
};

// Composite trapezoid on [lo, hi] starting from `intervals` panels and
// halving the spacing until successive estimates agree to rel_tol.  With
// `extrapolate` set, successive levels are combined by Richardson's rule
// (Romberg table), which is appropriate for smooth integrands only.
template <class F>
RefinedQuadrature refined_trapezoid(F&& f, double lo, double hi, int intervals,
                                    double rel_tol, int max_levels,
                                    bool extrapolate) {
  RefinedQuadrature out;
  if (hi == lo) {
    out.converged = true;
    return out;
  }
  intervals = std::max(intervals, 1);
  double h = (hi - lo) / intervals;
  double sum = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < intervals; ++i) sum += f(lo + i * h);
  std::vector<double> row{sum * h};
  for (int level = 1; level <= max_levels; ++level) {
    double mid = 0.0;
    for (int i = 0; i < intervals; ++i) mid += f(lo + (i + 0.5) * h);
    sum += mid;
    intervals *= 2;
    h *= 0.5;
    std::vector<double> next{sum * h};
    if (extrapolate) {
      double factor = 4.0;
      for (std::size_t j = 0; j < row.size() && j < 6; ++j) {
        next.push_back(next[j] + (next[j] - row[j]) / (factor - 1.0));
        factor *= 4.0;
      }
    }
    const double current = next.back();
    const double previous = row.back();
    out.value = current;
    out.error_estimate = std::abs(current - previous);
    out.intervals = intervals;
    const double scale = std::max(std::abs(current), 1e-300);
    if (out.error_estimate <= rel_tol * scale) {
      out.converged = true;
      return out;
    }
    row = std::move(next);
  }
  return out;
}

}  // namespace slepqns::detail

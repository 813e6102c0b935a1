#include "tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slepqns/errors.hpp"

namespace slepqns::detail {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct PivotedLu {
  std::vector<double> dl, d, du, du2;
  std::vector<char> swapped;
};

// Gaussian elimination with partial pivoting on T - shift*I, following the
// band structure of LAPACK's gttrf.  Exact zero pivots are nudged so the
// nearly singular systems met in inverse iteration stay solvable.
PivotedLu factor_shifted(const SymTridiagonal& t, double shift, double tiny) {
  const int n = t.size();
  PivotedLu lu;
  lu.d.resize(n);
  for (int i = 0; i < n; ++i) lu.d[i] = t.d[i] - shift;
  lu.dl.assign(t.e.begin(), t.e.end());
  lu.du.assign(t.e.begin(), t.e.end());
  lu.du2.assign(std::max(n - 2, 0), 0.0);
  lu.swapped.assign(std::max(n - 1, 0), 0);
  for (int i = 0; i + 1 < n; ++i) {
    if (std::abs(lu.d[i]) >= std::abs(lu.dl[i])) {
      if (lu.d[i] == 0.0) lu.d[i] = tiny;
      const double fact = lu.dl[i] / lu.d[i];
      lu.dl[i] = fact;
      lu.d[i + 1] -= fact * lu.du[i];
    } else {
      const double fact = lu.d[i] / lu.dl[i];
      lu.d[i] = lu.dl[i];
      lu.dl[i] = fact;
      const double temp = lu.du[i];
      lu.du[i] = lu.d[i + 1];
      lu.d[i + 1] = temp - fact * lu.d[i + 1];
      if (i + 2 < n) {
        lu.du2[i] = lu.du[i + 1];
        lu.du[i + 1] = -fact * lu.du[i + 1];
      }
      lu.swapped[i] = 1;
    }
  }
  if (n > 0 && lu.d[n - 1] == 0.0) lu.d[n - 1] = tiny;
  return lu;
}

void solve_in_place(const PivotedLu& lu, std::vector<double>& b) {
  const int n = static_cast<int>(lu.d.size());
  for (int i = 0; i + 1 < n; ++i) {
    if (!lu.swapped[i]) {
      b[i + 1] -= lu.dl[i] * b[i];
    } else {
      const double temp = b[i] - lu.dl[i] * b[i + 1];
      b[i] = b[i + 1];
      b[i + 1] = temp;
    }
  }
  b[n - 1] /= lu.d[n - 1];
  if (n > 1) b[n - 2] = (b[n - 2] - lu.du[n - 2] * b[n - 1]) / lu.d[n - 2];
  for (int i = n - 3; i >= 0; --i) {
    b[i] = (b[i] - lu.du[i] * b[i + 1] - lu.du2[i] * b[i + 2]) / lu.d[i];
  }
}

double normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s > 0.0) {
    for (double& x : v) x /= s;
  }
  return s;
}

}  // namespace

double SymTridiagonal::norm_bound() const {
  double bound = 0.0;
  const int n = size();
  for (int i = 0; i < n; ++i) {
    double row = std::abs(d[i]);
    if (i > 0) row += std::abs(e[i - 1]);
    if (i + 1 < n) row += std::abs(e[i]);
    bound = std::max(bound, row);
  }
  return bound;
}

int eigenvalues_below(const SymTridiagonal& t, double x) {
  const int n = t.size();
  const double guard = kEps * std::max(t.norm_bound(), 1.0);
  int count = 0;
  double q = t.d[0] - x;
  for (int i = 0;; ++i) {
    if (q == 0.0) q = -guard;
    if (q < 0.0) ++count;
    if (i + 1 == n) break;
    q = t.d[i + 1] - x - t.e[i] * t.e[i] / q;
  }
  return count;
}

double eigenvalue_by_bisection(const SymTridiagonal& t, int index) {
  const int n = t.size();
  if (index < 0 || index >= n) throw ParameterError("eigenvalue index out of range");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < n; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(t.e[i - 1]);
    if (i + 1 < n) r += std::abs(t.e[i]);
    lo = std::min(lo, t.d[i] - r);
    hi = std::max(hi, t.d[i] + r);
  }
  const double pad = kEps * std::max(std::abs(lo), std::abs(hi)) + 1e-300;
  lo -= pad;
  hi += pad;
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eigenvalues_below(t, mid) > index) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> inverse_iteration(const SymTridiagonal& t, double eigenvalue,
                                      std::span<const std::vector<double>> previous) {
  const int n = t.size();
  const double scale = std::max(t.norm_bound(), 1.0);
  const PivotedLu lu = factor_shifted(t, eigenvalue, kEps * scale);
  std::vector<double> x(n);
  // Deterministic start vector with components in every direction.
  for (int i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(1.0 + 0.7 * i);
  normalize(x);

  for (int iter = 0; iter < 8; ++iter) {
    solve_in_place(lu, x);
    for (const auto& p : previous) {
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += p[i] * x[i];
      for (int i = 0; i < n; ++i) x[i] -= dot * p[i];
    }
    const double growth = normalize(x);
    if (!std::isfinite(growth) || growth == 0.0) {
      throw NumericError("inverse iteration broke down");
    }
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
      double r = (t.d[i] - eigenvalue) * x[i];
      if (i > 0) r += t.e[i - 1] * x[i - 1];
      if (i + 1 < n) r += t.e[i] * x[i + 1];
      residual = std::max(residual, std::abs(r));
    }
    if (iter >= 1 && residual <= 64.0 * n * kEps * scale) return x;
  }
  throw NumericError("inverse iteration did not converge");
}

}  // namespace slepqns::detail

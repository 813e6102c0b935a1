#pragma once

#include <span>
#include <vector>

namespace slepqns::detail {

// Symmetric tridiagonal matrix with diagonal d (size n) and off-diagonal e
// (size n-1, e[i] couples rows i and i+1).
struct SymTridiagonal {
  std::vector<double> d;
  std::vector<double> e;

  int size() const { return static_cast<int>(d.size()); }
  double norm_bound() const;
};

// Number of eigenvalues strictly below x (Sturm sequence count).
int eigenvalues_below(const SymTridiagonal& t, double x);

// Eigenvalue of ascending index `index` by bisection to machine precision.
double eigenvalue_by_bisection(const SymTridiagonal& t, int index);

// Unit eigenvector for an accurate eigenvalue estimate via inverse iteration,
// kept orthogonal to `previous` (already normalized vectors).
std::vector<double> inverse_iteration(const SymTridiagonal& t, double eigenvalue,
                                      std::span<const std::vector<double>> previous);

}  // namespace slepqns::detail

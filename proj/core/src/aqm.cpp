#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "slepqns/errors.hpp"
#include "slepqns/estimation.hpp"

namespace slepqns {
namespace {

struct Weighting {
  std::vector<double> d;
  double broadband = 0.0;
  double local = 0.0;
  bool fallback = false;
};

// Normalized weights d_k ~ S / (S + B_BB + B_LB) from the clipped spectrum.
Weighting weights_at(const std::vector<TaperChannel>& taper, double s, const std::vector<double>& clipped,
                     double slope, bool use_local) {
  const std::size_t k_count = taper.size();
  Weighting w;
  w.d.assign(k_count, 0.0);
  std::vector<double> bb(k_count), lb(k_count);
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto& row = taper[k].broadband_row;
    bb[k] = std::inner_product(row.begin(), row.end(), clipped.begin(), 0.0);
    lb[k] = use_local ? slope * taper[k].local_moment : 0.0;
    const double denom = s + bb[k] + lb[k];
    w.d[k] = (s > 0.0 && denom > 0.0) ? s / denom : 0.0;
    total += w.d[k];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(w.d.begin(), w.d.end(), 1.0 / static_cast<double>(k_count));
    w.fallback = true;
  } else {
    for (double& d : w.d) d /= total;
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    w.broadband += w.d[k] * bb[k];
    w.local += w.d[k] * lb[k];
  }
  return w;
}

}  // namespace

std::vector<EstimateRecord> adaptive_multitaper(std::span<const double> shifts,
                                                const std::vector<std::vector<TaperChannel>>& channels,
                                                const MultitaperOptions& options) {
  const std::size_t p_count = shifts.size();
  if (channels.size() != p_count || p_count == 0)
    throw ParameterError("adaptive multitaper needs one channel set per shift frequency");
  for (std::size_t p = 0; p < p_count; ++p) {
    if (channels[p].size() < 2) throw ParameterError("adaptive multitaper needs at least two eigenestimates per shift");
    for (const TaperChannel& c : channels[p])
      if (c.broadband_row.size() != p_count) throw ParameterError("broadband rows must span the shift grid");
    if (p > 0 && !(shifts[p] > shifts[p - 1])) throw ParameterError("shift frequencies must be increasing");
  }

  std::vector<double> current(p_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    if (options.initial_from_k0) {
      current[p] = channels[p].front().estimate.value;
    } else {
      double sum = 0.0;
      for (const TaperChannel& c : channels[p]) sum += c.estimate.value;
      current[p] = sum / static_cast<double>(channels[p].size());
    }
  }

  std::vector<Weighting> weights(p_count);
  std::vector<bool> clipped(p_count, false);
  int iterations = 0;
  bool converged = false;
  for (int n = 1; n <= options.max_iterations && !converged; ++n) {
    iterations = n;
    std::vector<double> grid(p_count);
    for (std::size_t p = 0; p < p_count; ++p) {
      grid[p] = std::max(current[p], 0.0);
      if (current[p] < 0.0) clipped[p] = true;
    }
    std::vector<double> next(p_count);
    double scale = 0.0;
    for (double v : current) scale = std::max(scale, std::abs(v));
    double change = 0.0;
    for (std::size_t p = 0; p < p_count; ++p) {
      const double slope =
          p + 1 < p_count ? (current[p + 1] - current[p]) / (shifts[p + 1] - shifts[p]) : 0.0;
      weights[p] = weights_at(channels[p], grid[p], grid, slope, options.use_local_bias);
      if (weights[p].fallback) clipped[p] = true;
      double value = 0.0;
      for (std::size_t k = 0; k < channels[p].size(); ++k) value += weights[p].d[k] * channels[p][k].estimate.value;
      next[p] = value;
      const double denom = std::max({std::abs(current[p]), 1e-12 * scale, std::numeric_limits<double>::min()});
      change = std::max(change, std::abs(value - current[p]) / denom);
    }
    current = std::move(next);
    converged = change < options.tolerance;
  }

  std::vector<EstimateRecord> out(p_count);
  for (std::size_t p = 0; p < p_count; ++p) {
    EstimateRecord& r = out[p];
    const auto& taper = channels[p];
    r.omega_s = shifts[p];
    r.value = current[p];
    r.tag = "m";
    r.lo = taper.front().estimate.lo;
    r.hi = taper.front().estimate.hi;
    r.weights = weights[p].d;
    double variance = 0.0;
    for (std::size_t k = 0; k < taper.size(); ++k) variance += r.weights[k] * r.weights[k] * taper[k].estimate.variance;
    r.variance = variance;
    r.broadband_bias = weights[p].broadband;
    r.local_bias = weights[p].local;
    r.iterations = iterations;
    r.converged = converged;
    r.clipped = clipped[p];
  }
  return out;
}

}  // namespace slepqns

#include "slepqns/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <variant>

#include "slepqns/errors.hpp"

namespace slepqns {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double hard_cutoff(const PsdModel& model) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, WhitePlusLine> || std::is_same_v<T, Flat>) return v.cutoff;
        return kInf;
      },
      model.variant());
}

void require_area(const PassbandSpec& pb) {
  if (!(pb.area > 0.0)) throw ParameterError("passband area must be positive");
}

EstimateRecord passband_estimate(const ExperimentResult& result, const PassbandSpec& pb, double min_area) {
  if (!(pb.area > min_area)) throw ParameterError("degenerate passband: area below the quadrature tolerance");
  EstimateRecord r;
  r.omega_s = pb.center;
  r.value = result.signal / pb.area;
  r.variance = result.variance() / (pb.area * pb.area);
  r.lo = pb.lo;
  r.hi = pb.hi;
  r.area = pb.area;
  return r;
}

}  // namespace

double EstimateRecord::std_dev() const { return std::sqrt(std::max(variance, 0.0)); }

void SpectrumEstimate::validate() const {
  if (value.size() != omega.size() || std_dev.size() != omega.size())
    throw ParameterError("spectrum estimate columns must have equal length");
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (!std::isfinite(value[i]) || !std::isfinite(std_dev[i])) throw NumericError("spectrum estimate is not finite");
    if (i > 0 && !(omega[i] > omega[i - 1])) throw ParameterError("spectrum grid must be strictly increasing");
  }
}

GridSpectrum::GridSpectrum(std::vector<double> omega, std::vector<double> value)
    : omega_(std::move(omega)), value_(std::move(value)) {
  if (omega_.empty() || omega_.size() != value_.size())
    throw ParameterError("grid spectrum needs matching, non-empty knots and values");
  for (std::size_t i = 1; i < omega_.size(); ++i)
    if (!(omega_[i] > omega_[i - 1])) throw ParameterError("grid spectrum knots must be strictly increasing");
}

double GridSpectrum::operator()(double omega) const {
  if (omega <= omega_.front()) return value_.front();
  if (omega >= omega_.back()) return value_.back();
  const auto it = std::upper_bound(omega_.begin(), omega_.end(), omega);
  const std::size_t i = static_cast<std::size_t>(it - omega_.begin()) - 1;
  const double t = (omega - omega_[i]) / (omega_[i + 1] - omega_[i]);
  return value_[i] + t * (value_[i + 1] - value_[i]);
}

std::optional<double> GridSpectrum::slope(std::size_t p) const {
  if (p + 1 >= omega_.size()) return std::nullopt;
  return (value_[p + 1] - value_[p]) / (omega_[p + 1] - omega_[p]);
}

EstimateRecord eigenestimate(const ExperimentResult& result, const PassbandSpec& pb, double min_area) {
  EstimateRecord r = passband_estimate(result, pb, min_area);
  r.tag = "eigen";
  return r;
}

EstimateRecord ssqm_estimate(const ExperimentResult& result, const PassbandSpec& pb, double min_area) {
  EstimateRecord r = passband_estimate(result, pb, min_area);
  r.tag = "ss";
  return r;
}

double expected_estimate(const PsdModel& model, const FilterCurve& filter, const PassbandSpec& pb,
                         const IntegrationOptions& options) {
  require_area(pb);
  return expected_signal(model, filter, options) / pb.area;
}

std::vector<double> broadband_bias_row(std::span<const double> knots, const PassbandSpec& pb,
                                       const FilterCurve& filter, const IntegrationOptions& options) {
  require_area(pb);
  if (knots.empty()) throw ParameterError("broadband bias needs at least one knot");
  const std::size_t n = knots.size();
  std::vector<double> row(n, 0.0);

  // Breakpoints: 0, knots below a, a | b, knots above b.
  std::vector<double> lower{0.0};
  for (double k : knots)
    if (k > 0.0 && k < pb.lo) lower.push_back(k);
  if (pb.lo > 0.0) lower.push_back(pb.lo);
  std::vector<double> upper{pb.hi};
  for (double k : knots)
    if (k > pb.hi) upper.push_back(k);

  auto add_piece = [&](double u, double v) {
    if (!(v > u)) return;
    if (v <= knots.front()) {
      row.front() += filter.integrate(u, v, options);
      return;
    }
    if (u >= knots.back()) {
      row.back() += filter.integrate(u, v, options);
      return;
    }
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), u) - knots.begin()) - 1;
    const double width = knots[i + 1] - knots[i];
    const double m0 = filter.integrate(u, v, options);
    const double m1 = filter.integrate([&](double w) { return w - knots[i]; }, u, v, options);
    row[i] += m0 - m1 / width;
    row[i + 1] += m1 / width;
  };
  for (std::size_t i = 0; i + 1 < lower.size(); ++i) add_piece(lower[i], lower[i + 1]);
  for (std::size_t i = 0; i + 1 < upper.size(); ++i) add_piece(upper[i], upper[i + 1]);
  row.back() += filter.integrate(upper.back(), kInf, options);

  for (double& r : row) r /= kPi * pb.area;
  return row;
}

double broadband_bias(const GridSpectrum& spectrum, const PassbandSpec& pb, const FilterCurve& filter,
                      const IntegrationOptions& options) {
  const std::vector<double> row = broadband_bias_row(spectrum.knots(), pb, filter, options);
  const auto v = spectrum.values();
  return std::inner_product(row.begin(), row.end(), v.begin(), 0.0);
}

double broadband_bias(const PsdModel& model, const PassbandSpec& pb, const FilterCurve& filter,
                      const IntegrationOptions& options) {
  require_area(pb);
  const double cut = hard_cutoff(model);
  auto s = [&](double w) { return model(w); };
  double total = filter.integrate(s, 0.0, std::min(pb.lo, cut), options);
  if (cut > pb.hi) total += filter.integrate(s, pb.hi, cut, options);
  return total / (kPi * pb.area);
}

double local_bias_moment(const PassbandSpec& pb, const FilterCurve& filter, const IntegrationOptions& options) {
  require_area(pb);
  const double m1 = filter.integrate([&](double w) { return w - pb.center; }, pb.lo, pb.hi, options);
  return m1 / (kPi * pb.area);
}

LocalBias local_bias(const GridSpectrum& spectrum, std::size_t p, const PassbandSpec& pb, const FilterCurve& filter,
                     const IntegrationOptions& options) {
  const std::optional<double> slope = spectrum.slope(p);
  if (!slope) return {0.0, true};
  return {*slope * local_bias_moment(pb, filter, options), false};
}

std::vector<double> effective_segment_areas(std::span<const double> weights,
                                            const std::vector<std::vector<double>>& taper_segment_areas,
                                            std::span<const double> taper_areas) {
  if (weights.size() != taper_segment_areas.size() || weights.size() != taper_areas.size())
    throw ParameterError("effective areas need one weight, segment row and area per taper");
  if (weights.empty()) return {};
  std::vector<double> out(taper_segment_areas.front().size(), 0.0);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (taper_segment_areas[k].size() != out.size()) throw ParameterError("segment rows differ in length");
    for (std::size_t q = 0; q < out.size(); ++q) out[q] += weights[k] * taper_segment_areas[k][q] / taper_areas[k];
  }
  return out;
}

FilterCurve effective_filter(std::span<const FilterCurve> filters, std::span<const double> weights,
                             std::span<const double> areas) {
  if (weights.size() != filters.size() || areas.size() != filters.size())
    throw ParameterError("effective filter needs one weight and area per filter");
  std::vector<double> scaled(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) scaled[k] = weights[k] / areas[k];
  return FilterCurve::combine(filters, scaled);
}

std::vector<double> fisher_information(std::span<const double> row, double variance) {
  if (!(variance > 0.0)) throw ParameterError("Fisher information needs a positive variance");
  std::vector<double> out(row.size());
  for (std::size_t q = 0; q < row.size(); ++q) out[q] = row[q] * row[q] / variance;
  return out;
}

std::vector<double> fisher_information_passband(std::span<const double> segment_areas, int shots, double sigma2) {
  if (shots < 1 || !(sigma2 > 0.0)) throw ParameterError("Fisher information needs M >= 1 and sigma^2 > 0");
  std::vector<double> out(segment_areas.size());
  for (std::size_t q = 0; q < out.size(); ++q) out[q] = shots * segment_areas[q] * segment_areas[q] / sigma2;
  return out;
}

std::vector<double> fisher_information_multitaper(std::span<const double> effective_areas,
                                                  std::span<const double> weights,
                                                  std::span<const double> taper_areas, int shots, double sigma2) {
  if (weights.size() != taper_areas.size()) throw ParameterError("one area per multitaper weight is required");
  double denom = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) denom += weights[k] * weights[k] / (taper_areas[k] * taper_areas[k]);
  if (!(denom > 0.0) || shots < 1 || !(sigma2 > 0.0))
    throw ParameterError("multitaper Fisher information needs nonzero weights, M >= 1 and sigma^2 > 0");
  std::vector<double> out(effective_areas.size());
  for (std::size_t q = 0; q < out.size(); ++q)
    out[q] = shots / denom * effective_areas[q] * effective_areas[q] / sigma2;
  return out;
}

std::vector<double> fisher_covariance_term(std::span<const double> segment_areas, double p_up) {
  if (!(p_up > 0.0 && p_up < 1.0)) throw ParameterError("survival probability must lie strictly inside (0, 1)");
  const double factor = (2.0 * p_up - 1.0) / (p_up * (1.0 - p_up));
  std::vector<double> out(segment_areas.size());
  for (std::size_t q = 0; q < out.size(); ++q) {
    const double x = segment_areas[q] * factor;
    out[q] = 0.5 * x * x;
  }
  return out;
}

InterpolatedEstimate interpolated_estimate(std::span<const double> values, std::span<const double> variances,
                                           const std::vector<std::vector<double>>& information,
                                           std::span<const double> segment_centres) {
  const std::size_t p_count = values.size();
  if (variances.size() != p_count) throw ParameterError("one variance per estimate is required");
  if (information.size() != segment_centres.size())
    throw ParameterError("information matrix needs one row per segment");
  InterpolatedEstimate out;
  SpectrumEstimate& s = out.spectrum;
  s.tag = "interpolated";
  s.omega.assign(segment_centres.begin(), segment_centres.end());
  for (const auto& row : information) {
    if (row.size() != p_count) throw ParameterError("information rows need one entry per estimate");
    const double total = std::accumulate(row.begin(), row.end(), 0.0);
    std::vector<double> w(p_count, 0.0);
    double value = 0.0;
    double variance = 0.0;
    const bool ok = total > 0.0 && std::isfinite(total);
    if (ok) {
      for (std::size_t p = 0; p < p_count; ++p) {
        w[p] = row[p] / total;
        value += w[p] * values[p];
        variance += w[p] * w[p] * variances[p];
      }
    }
    s.value.push_back(value);
    s.std_dev.push_back(std::sqrt(variance));
    s.unestimable.push_back(!ok);
    out.weights.push_back(std::move(w));
  }
  return out;
}

double passband_sigma_bound(int shots, double area) {
  if (shots < 1 || !(area > 0.0)) throw ParameterError("sigma bound needs M >= 1 and A > 0");
  return 1.0 / std::sqrt(4.0 * shots * area * area);
}

double multitaper_sigma_bound(std::span<const double> weights, std::span<const int> shots,
                              std::span<const double> areas) {
  if (weights.size() != shots.size() || weights.size() != areas.size())
    throw ParameterError("sigma bound needs one shot count and area per weight");
  double v = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double b = passband_sigma_bound(shots[k], areas[k]);
    v += weights[k] * weights[k] * b * b;
  }
  return std::sqrt(v);
}

SignificanceResult significance_test(std::span<const double> values, std::span<const double> sigma_bounds) {
  if (values.size() < 3) throw ParameterError("significance test needs at least three estimates");
  if (sigma_bounds.size() != values.size()) throw ParameterError("one sigma bound per estimate is required");
  SignificanceResult r;
  r.null_mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (!(sigma_bounds[p] > 0.0)) throw ParameterError("sigma bounds must be positive");
    r.z.push_back((values[p] - r.null_mean) / sigma_bounds[p]);
  }
  return r;
}

void write_spectrum_csv(const SpectrumEstimate& s, std::ostream& out) {
  out << "omega_rad_per_s,estimate_per_hz,std_dev_per_hz,tag\n";
  char line[128];
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(line, sizeof line, "%.12e,%.12e,%.12e,", s.omega[i], s.value[i], s.std_dev[i]);
    out << line << s.tag << '\n';
  }
}

nlohmann::json to_json(const EstimateRecord& r) {
  nlohmann::json j{{"omega_s_rad_per_s", r.omega_s},
                   {"value", r.value},
                   {"variance", r.variance},
                   {"tag", r.tag},
                   {"passband_rad_per_s", {r.lo, r.hi}},
                   {"area", r.area},
                   {"converged", r.converged},
                   {"clipped", r.clipped}};
  if (r.order >= 0) j["order"] = r.order;
  if (r.broadband_bias) j["broadband_bias"] = *r.broadband_bias;
  if (r.local_bias) j["local_bias"] = *r.local_bias;
  if (!r.weights.empty()) {
    j["weights"] = r.weights;
    j["iterations"] = r.iterations;
  }
  return j;
}

nlohmann::json to_json(const SpectrumEstimate& s) {
  nlohmann::json j{{"tag", s.tag},
                   {"omega_rad_per_s", s.omega},
                   {"estimate", s.value},
                   {"std_dev", s.std_dev},
                   {"provenance", s.provenance}};
  if (!s.unestimable.empty()) j["unestimable"] = s.unestimable;
  return j;
}

}  // namespace slepqns

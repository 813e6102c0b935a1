#pragma once

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slepqns/filter.hpp"
#include "slepqns/qubit_sim.hpp"

namespace slepqns {

struct EstimateRecord {
  double omega_s = 0.0;
  double value = 0.0;
  double variance = 0.0;
  std::string tag;  // "k=<order>", "ss", "m", "rse", "comb"
  int order = -1;
  double lo = 0.0;
  double hi = 0.0;
  double area = 0.0;
  std::optional<double> broadband_bias;
  std::optional<double> local_bias;
  std::vector<double> weights;  // AQM d_k
  int iterations = 0;           // AQM n_c
  bool converged = true;
  bool clipped = false;  // a negative iterate was clipped inside the weights

  double std_dev() const;
};

struct SpectrumEstimate {
  std::vector<double> omega;
  std::vector<double> value;
  std::vector<double> std_dev;
  std::string tag;
  std::vector<bool> unestimable;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const { return omega.size(); }
  void validate() const;
};

// Piecewise-linear spectrum through (omega_p, value_p), extended by the edge
// values outside the sampled range.
class GridSpectrum {
 public:
  GridSpectrum(std::vector<double> omega, std::vector<double> value);

  double operator()(double omega) const;
  std::span<const double> knots() const { return omega_; }
  std::span<const double> values() const { return value_; }
  // Forward difference (S_{p+1} - S_p) / (omega_{p+1} - omega_p); empty at the last point.
  std::optional<double> slope(std::size_t p) const;

 private:
  std::vector<double> omega_;
  std::vector<double> value_;
};

// value = S(T) / A, variance = sigma^2 / (M A^2).
EstimateRecord eigenestimate(const ExperimentResult& result, const PassbandSpec& pb, double min_area = 1e-12);
// Same estimator for an SSQM filter, tagged "ss".
EstimateRecord ssqm_estimate(const ExperimentResult& result, const PassbandSpec& pb, double min_area = 1e-12);
// Expected value (M -> infinity) of a passband estimate, (1/(pi A)) int F S.
double expected_estimate(const PsdModel& model, const FilterCurve& filter, const PassbandSpec& pb,
                         const IntegrationOptions& options = {});

// (1/(pi A)) * integral of F S over [0, inf) outside [a, b].
double broadband_bias(const GridSpectrum& spectrum, const PassbandSpec& pb, const FilterCurve& filter,
                      const IntegrationOptions& options = {});
double broadband_bias(const PsdModel& model, const PassbandSpec& pb, const FilterCurve& filter,
                      const IntegrationOptions& options = {});

// Row r with broadband_bias(GridSpectrum(knots, s)) = r . s for every s.
std::vector<double> broadband_bias_row(std::span<const double> knots, const PassbandSpec& pb,
                                       const FilterCurve& filter, const IntegrationOptions& options = {});

// (1/(pi A)) * integral over [a, b] of F (omega - omega_s).
double local_bias_moment(const PassbandSpec& pb, const FilterCurve& filter, const IntegrationOptions& options = {});

struct LocalBias {
  double value = 0.0;
  bool missing_neighbor = false;
};

// First-order local bias S'(omega_s) * moment with the forward difference of
// the grid at index p.
LocalBias local_bias(const GridSpectrum& spectrum, std::size_t p, const PassbandSpec& pb, const FilterCurve& filter,
                     const IntegrationOptions& options = {});

// Inputs of the adaptive multitaper at one shift frequency and taper order.
struct TaperChannel {
  EstimateRecord estimate;            // eigenestimate of this order
  std::vector<double> broadband_row;  // broadband_bias_row over the shift grid
  double local_moment = 0.0;          // local_bias_moment
};

struct MultitaperOptions {
  double tolerance = 1e-6;
  int max_iterations = 50;
  bool use_local_bias = true;
  bool initial_from_k0 = false;  // default initial estimate is the equal-weight average
};

// Thomson-style reweighting over all shift frequencies jointly: each
// iteration recomputes both biases from the previous estimate on the grid.
// channels[p][k] holds order k at shift p.
std::vector<EstimateRecord> adaptive_multitaper(std::span<const double> shifts,
                                                const std::vector<std::vector<TaperChannel>>& channels,
                                                const MultitaperOptions& options = {});

// Segment areas R_q of the effective filter sum_k d_k F_k / A_k, from the
// per-taper segment areas A_q^(k) and passband areas A^(k).
std::vector<double> effective_segment_areas(std::span<const double> weights,
                                            const std::vector<std::vector<double>>& taper_segment_areas,
                                            std::span<const double> taper_areas);

FilterCurve effective_filter(std::span<const FilterCurve> filters, std::span<const double> weights,
                             std::span<const double> areas);

// Leading Fisher information row_q^2 / var for an estimate whose mean is
// sum_q row_q S_q; row = A_q / A for passband estimates and R_q for AQM.
std::vector<double> fisher_information(std::span<const double> row, double variance);
// Passband form M (A_q / sigma)^2.
std::vector<double> fisher_information_passband(std::span<const double> segment_areas, int shots, double sigma2);
// AQM form M / (sum_k d_k^2 / A_k^2) * (R_q / sigma)^2.
std::vector<double> fisher_information_multitaper(std::span<const double> effective_areas,
                                                  std::span<const double> weights,
                                                  std::span<const double> taper_areas, int shots, double sigma2);
// Covariance-dependence term (1/2) {A_q (2P - 1) / (P (1 - P))}^2 of a
// passband estimate whose variance P (1 - P) / (M A^2) depends on S.
std::vector<double> fisher_covariance_term(std::span<const double> segment_areas, double p_up);

struct InterpolatedEstimate {
  SpectrumEstimate spectrum;
  std::vector<std::vector<double>> weights;  // normalized I_qp, Q x P
};

// S_q = sum_p I_qp S_p with rows of `information` (Q x P) normalized to one.
InterpolatedEstimate interpolated_estimate(std::span<const double> values, std::span<const double> variances,
                                           const std::vector<std::vector<double>>& information,
                                           std::span<const double> segment_centres);

// sigma bound 1 / sqrt(4 M A^2) of a passband estimate.
double passband_sigma_bound(int shots, double area);
// sqrt(sum_k d_k^2 / (4 M_k A_k^2)) for a weighted combination of eigenestimates.
double multitaper_sigma_bound(std::span<const double> weights, std::span<const int> shots,
                              std::span<const double> areas);

struct SignificanceResult {
  double null_mean = 0.0;
  std::vector<double> z;
};

// z_p = (S_p - mean_p S_p) / sigma_bound_p under a flat null.
SignificanceResult significance_test(std::span<const double> values, std::span<const double> sigma_bounds);

void write_spectrum_csv(const SpectrumEstimate& s, std::ostream& out);
nlohmann::json to_json(const EstimateRecord& r);
nlohmann::json to_json(const SpectrumEstimate& s);

}  // namespace slepqns

#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slepqns/estimation.hpp"

namespace slepqns {

// Q segments [(q-1) d_omega, q d_omega) covering [0, Q d_omega).
struct SegmentGrid {
  double d_omega = 0.0;
  int count = 0;

  void validate() const;
  double centre(int q) const { return (q + 0.5) * d_omega; }  // q = 0..count-1
  std::vector<double> centres() const;
  double upper() const { return count * d_omega; }
};

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // includes the regularization
  double lambda = 0.0;
  double condition_number = 0.0;
  bool lambda_raised = false;  // the requested lambda violated the condition limit

  Eigen::Index size() const { return mean.size(); }
  Eigen::VectorXd std_dev() const;
  // Equal-tailed interval mean -/+ z sd at the given level.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> credible_interval(double level = 0.95) const;
  std::vector<bool> negative_mean() const;
};

struct PriorOptions {
  std::optional<double> lambda;  // default 1e-6 trace / Q
  double condition_limit = 1e10;
};

// Mean and raw covariance plus Tikhonov regularization; lambda is raised by
// decades until the condition number is below the limit.
GaussianBelief build_prior(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance, const PriorOptions& options = {});

// mu_0 = interpolated values, (Sigma_0)_qq' = sum_p I_qp I_q'p var_p.
GaussianBelief build_prior(const InterpolatedEstimate& interpolated, std::span<const double> variances,
                           const PriorOptions& options = {});

GaussianBelief diffuse_prior(int q, double sigma0, double mean = 0.0);

// Conjugate update with data = F S + noise, noise ~ N(0, diag(variances)),
// solved as a whitened least-squares problem (gain form for singular priors).
GaussianBelief posterior(const GaussianBelief& prior, const Eigen::VectorXd& data, const Eigen::MatrixXd& f,
                         const Eigen::VectorXd& variances);

double condition_number(const Eigen::MatrixXd& symmetric);

void write_posterior_csv(const GaussianBelief& belief, std::span<const double> omega, std::ostream& out,
                         double level = 0.95);

}  // namespace slepqns

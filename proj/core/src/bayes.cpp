#include "slepqns/bayes.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "slepqns/errors.hpp"

namespace slepqns {

void SegmentGrid::validate() const {
  if (!(d_omega > 0.0) || count < 1) throw ParameterError("segment grid needs d_omega > 0 and Q >= 1");
}

std::vector<double> SegmentGrid::centres() const {
  validate();
  std::vector<double> out(count);
  for (int q = 0; q < count; ++q) out[q] = centre(q);
  return out;
}

Eigen::VectorXd GaussianBelief::std_dev() const { return covariance.diagonal().cwiseMax(0.0).cwiseSqrt(); }

std::pair<Eigen::VectorXd, Eigen::VectorXd> GaussianBelief::credible_interval(double level) const {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("credible level must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
  const Eigen::VectorXd sd = std_dev();
  return {mean - z * sd, mean + z * sd};
}

std::vector<bool> GaussianBelief::negative_mean() const {
  std::vector<bool> out(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) out[i] = mean(i) < 0.0;
  return out;
}

double condition_number(const Eigen::MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

GaussianBelief build_prior(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance, const PriorOptions& options) {
  const Eigen::Index q = mean.size();
  if (covariance.rows() != q || covariance.cols() != q) throw ParameterError("prior covariance must be Q x Q");
  if (q == 0) throw ParameterError("prior needs at least one segment");
  if (!(options.condition_limit > 1.0)) throw ParameterError("condition limit must exceed 1");
  const Eigen::MatrixXd sym = 0.5 * (covariance + covariance.transpose());

  GaussianBelief b;
  b.mean = std::move(mean);
  double lambda = options.lambda.value_or(1e-6 * sym.trace() / static_cast<double>(q));
  if (lambda < 0.0) throw ParameterError("regularization must be non-negative");
  const double floor = std::max(1e-300, 1e-16 * std::abs(sym.trace()) / static_cast<double>(q));
  for (int attempt = 0; attempt < 64; ++attempt) {
    b.covariance = sym;
    b.covariance.diagonal().array() += lambda;
    b.condition_number = condition_number(b.covariance);
    if (b.condition_number < options.condition_limit) break;
    lambda = lambda > 0.0 ? 10.0 * lambda : floor;
    b.lambda_raised = true;
  }
  if (!(b.condition_number < options.condition_limit))
    throw NumericError("prior covariance could not be regularized (condition number " +
                       std::to_string(b.condition_number) + ")");
  b.lambda = lambda;
  return b;
}

GaussianBelief build_prior(const InterpolatedEstimate& interpolated, std::span<const double> variances,
                           const PriorOptions& options) {
  const auto& w = interpolated.weights;
  const Eigen::Index q = static_cast<Eigen::Index>(w.size());
  const Eigen::Index p = static_cast<Eigen::Index>(variances.size());
  Eigen::MatrixXd weights(q, p);
  for (Eigen::Index i = 0; i < q; ++i) {
    if (static_cast<Eigen::Index>(w[i].size()) != p) throw ParameterError("interpolation weights must be Q x P");
    for (Eigen::Index j = 0; j < p; ++j) weights(i, j) = w[i][j];
  }
  const Eigen::VectorXd var = Eigen::Map<const Eigen::VectorXd>(variances.data(), p);
  const Eigen::MatrixXd cov = weights * var.asDiagonal() * weights.transpose();
  const auto& values = interpolated.spectrum.value;
  Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return build_prior(std::move(mean), cov, options);
}

GaussianBelief diffuse_prior(int q, double sigma0, double mean) {
  if (q < 1 || !(sigma0 > 0.0)) throw ParameterError("diffuse prior needs Q >= 1 and sigma0 > 0");
  GaussianBelief b;
  b.mean = Eigen::VectorXd::Constant(q, mean);
  b.covariance = Eigen::MatrixXd::Identity(q, q) * (sigma0 * sigma0);
  b.condition_number = 1.0;
  return b;
}

GaussianBelief posterior(const GaussianBelief& prior, const Eigen::VectorXd& data, const Eigen::MatrixXd& f,
                         const Eigen::VectorXd& variances) {
  const Eigen::Index q = prior.size();
  const Eigen::Index p = data.size();
  if (f.rows() != p || f.cols() != q) throw ParameterError("filter matrix must be P x Q");
  if (variances.size() != p) throw ParameterError("one data variance per row is required");
  if (p > 0 && !(variances.minCoeff() > 0.0)) throw ParameterError("data variances must be positive");
  GaussianBelief out = prior;
  if (p == 0) return out;

  // Square-root form: least squares on the whitened stack [L0^-1; Sigma^-1/2 F]
  // stays accurate when the prior is far wider than the data constrain,
  // where Sigma_0 - K F Sigma_0 cancels catastrophically.
  const Eigen::LLT<Eigen::MatrixXd> prior_llt(prior.covariance);
  if (prior_llt.info() == Eigen::Success) {
    const auto l0 = prior_llt.matrixL();
    const Eigen::VectorXd inv_sd = variances.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd stacked(q + p, q);
    stacked.topRows(q) = l0.solve(Eigen::MatrixXd::Identity(q, q));
    stacked.bottomRows(p) = inv_sd.asDiagonal() * f;
    Eigen::VectorXd rhs(q + p);
    rhs.head(q) = l0.solve(prior.mean);
    rhs.tail(p) = inv_sd.cwiseProduct(data);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
    const Eigen::VectorXd qtb = (qr.householderQ().transpose() * rhs).head(q);
    const auto upper = r.triangularView<Eigen::Upper>();
    out.mean = upper.solve(qtb);
    const Eigen::MatrixXd r_inv = upper.solve(Eigen::MatrixXd::Identity(q, q));
    out.covariance = r_inv * r_inv.transpose();
    out.condition_number = condition_number(out.covariance);
    return out;
  }

  // Singular prior: gain form K = Sigma_0 F^T (F Sigma_0 F^T + Sigma)^-1.
  const Eigen::MatrixXd sf = prior.covariance * f.transpose();  // Q x P
  Eigen::MatrixXd innovation = f * sf;
  innovation.diagonal() += variances;
  innovation = 0.5 * (innovation + innovation.transpose());
  Eigen::MatrixXd gain_t;  // K^T = S^-1 F Sigma_0
  Eigen::LLT<Eigen::MatrixXd> llt(innovation);
  if (llt.info() == Eigen::Success) {
    gain_t = llt.solve(sf.transpose());
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(innovation);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericError("posterior update failed: innovation matrix not positive definite (condition number " +
                         std::to_string(condition_number(innovation)) + ")");
    gain_t = ldlt.solve(sf.transpose());
  }
  out.mean = prior.mean + gain_t.transpose() * (data - f * prior.mean);
  Eigen::MatrixXd cov = prior.covariance - sf * gain_t;
  out.covariance = 0.5 * (cov + cov.transpose());
  out.condition_number = condition_number(out.covariance);
  return out;
}

void write_posterior_csv(const GaussianBelief& belief, std::span<const double> omega, std::ostream& out,
                         double level) {
  if (static_cast<Eigen::Index>(omega.size()) != belief.size()) throw ParameterError("one frequency per segment");
  const auto [lo, hi] = belief.credible_interval(level);
  out << "omega_rad_per_s,mean_per_hz,ci_low_per_hz,ci_high_per_hz\n";
  char line[128];
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    std::snprintf(line, sizeof line, "%.12e,%.12e,%.12e,%.12e\n", omega[i], belief.mean(k), lo(k), hi(k));
    out << line;
  }
}

}  // namespace slepqns

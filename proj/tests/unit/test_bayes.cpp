#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "slepqns/bayes.hpp"
#include "slepqns/errors.hpp"

using namespace slepqns;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_spd(int q, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  MatrixXd a(q, q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) a(i, j) = g(rng);
  return a * a.transpose() + 0.5 * MatrixXd::Identity(q, q);
}

MatrixXd random_matrix(int p, int q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd f(p, q);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < q; ++j) f(i, j) = u(rng);
  return f;
}

struct Problem {
  GaussianBelief prior;
  MatrixXd f;
  VectorXd data, variances;
};

Problem problem(int p, int q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Problem pr;
  VectorXd mean(q);
  for (int i = 0; i < q; ++i) mean(i) = g(rng);
  pr.prior = build_prior(mean, random_spd(q, rng), {.lambda = 0.0});
  pr.f = random_matrix(p, q, rng);
  pr.data = VectorXd(p);
  pr.variances = VectorXd(p);
  for (int i = 0; i < p; ++i) pr.data(i) = g(rng), pr.variances(i) = 0.1 + std::abs(g(rng));
  return pr;
}

}  // namespace

TEST(Bayes, EmptyDataLeavesPriorUnchanged) {
  const auto pr = problem(3, 5, 1);
  const auto post = posterior(pr.prior, VectorXd(0), MatrixXd(0, 5), VectorXd(0));
  EXPECT_TRUE(post.mean.isApprox(pr.prior.mean));
  EXPECT_TRUE(post.covariance.isApprox(pr.prior.covariance));
}

TEST(Bayes, PosteriorCovarianceShrinksInLoewnerOrder) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto pr = problem(4, 6, s);
    const auto post = posterior(pr.prior, pr.data, pr.f, pr.variances);
    const MatrixXd diff = pr.prior.covariance - post.covariance;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (diff + diff.transpose()));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * pr.prior.covariance.norm());
    Eigen::SelfAdjointEigenSolver<MatrixXd> ps(post.covariance);
    EXPECT_GT(ps.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Bayes, MatchesInformationFormUpdate) {
  const auto pr = problem(4, 6, 7);
  const auto post = posterior(pr.prior, pr.data, pr.f, pr.variances);
  const MatrixXd ninv = pr.variances.cwiseInverse().asDiagonal();
  const MatrixXd p0inv = pr.prior.covariance.inverse();
  const MatrixXd cov = (p0inv + pr.f.transpose() * ninv * pr.f).inverse();
  const VectorXd mean = cov * (p0inv * pr.prior.mean + pr.f.transpose() * ninv * pr.data);
  EXPECT_LT((post.covariance - cov).norm(), 1e-9 * cov.norm());
  EXPECT_LT((post.mean - mean).norm(), 1e-9 * (1.0 + mean.norm()));
}

TEST(Bayes, PermutingObservationsDoesNotMatter) {
  const auto pr = problem(5, 4, 3);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const auto a = posterior(pr.prior, pr.data, pr.f, pr.variances);
  const auto b = posterior(pr.prior, perm * pr.data, perm * pr.f, perm * pr.variances);
  EXPECT_LT((a.mean - b.mean).norm(), 1e-12 * (1.0 + a.mean.norm()));
  EXPECT_LT((a.covariance - b.covariance).norm(), 1e-12 * a.covariance.norm());
}

TEST(Bayes, SequentialUpdatesEqualBatch) {
  const auto pr = problem(6, 4, 11);
  const auto batch = posterior(pr.prior, pr.data, pr.f, pr.variances);
  const auto first = posterior(pr.prior, pr.data.head(3), pr.f.topRows(3), pr.variances.head(3));
  const auto second = posterior(first, pr.data.tail(3), pr.f.bottomRows(3), pr.variances.tail(3));
  EXPECT_LT((batch.mean - second.mean).norm(), 1e-9 * (1.0 + batch.mean.norm()));
}

TEST(Bayes, DiffusePriorApproachesLeastSquares) {
  std::mt19937_64 rng(4);
  const int q = 4, p = 8;
  const MatrixXd f = random_matrix(p, q, rng);
  VectorXd truth(q), var(p);
  truth << 1.0, -2.0, 0.5, 3.0;
  var.setConstant(0.01);
  const VectorXd data = f * truth;
  const auto post = posterior(diffuse_prior(q, 1e6), data, f, var);
  EXPECT_LT((post.mean - truth).norm(), 1e-6);
  const MatrixXd fisher = f.transpose() * var.cwiseInverse().asDiagonal() * f;
  EXPECT_LT((post.covariance - fisher.inverse()).norm(), 1e-6 * fisher.inverse().norm());
}

TEST(Bayes, PriorRegularizationMeetsConditionLimit) {
  MatrixXd cov = MatrixXd::Zero(3, 3);
  cov(0, 0) = 1.0;
  cov(1, 1) = 1e-14;
  const auto prior = build_prior(VectorXd::Zero(3), cov, {.lambda = std::nullopt, .condition_limit = 1e6});
  EXPECT_LT(prior.condition_number, 1e6);
  EXPECT_TRUE(prior.lambda_raised);
  EXPECT_GT(prior.lambda, 0.0);
}

TEST(Bayes, RejectsBadInputs) {
  const auto pr = problem(3, 4, 2);
  VectorXd bad = pr.variances;
  bad(1) = 0.0;
  EXPECT_THROW(posterior(pr.prior, pr.data, pr.f, bad), ParameterError);
  EXPECT_THROW(posterior(pr.prior, pr.data, MatrixXd::Ones(3, 5), pr.variances), ParameterError);
}

TEST(Bayes, CredibleIntervalAndCsv) {
  const auto prior = diffuse_prior(2, 2.0, 1.0);
  const auto [lo, hi] = prior.credible_interval(0.95);
  EXPECT_NEAR(hi(0) - 1.0, 1.959963984540054 * 2.0, 1e-9);
  EXPECT_NEAR(1.0 - lo(0), 1.959963984540054 * 2.0, 1e-9);
  std::ostringstream csv;
  const std::vector<double> omega{1.0, 2.0};
  write_posterior_csv(prior, omega, csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "omega_rad_per_s,mean_per_hz,ci_low_per_hz,ci_high_per_hz");
}

TEST(Bayes, SegmentGrid) {
  const SegmentGrid g{2.0, 3};
  EXPECT_DOUBLE_EQ(g.centre(0), 1.0);
  EXPECT_DOUBLE_EQ(g.upper(), 6.0);
  EXPECT_EQ(g.centres().size(), 3u);
  EXPECT_THROW((SegmentGrid{0.0, 3}.validate()), ParameterError);
}

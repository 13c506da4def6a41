#pragma once

// Binomial counts driven by a latent Gaussian process, and an importance
// sampling estimator of the log-posterior of its parameters.
//
//   S | phi, tau2      ~ N_l(0, tau2 R),  R_ij = exp(-|| (z_i - z_j) / phi ||)
//   p_i                = logistic(s_i + mu + z_i' beta)
//   Y_i | s_i, mu, beta ~ Bin(n, p_i)
//
// Parameters live on x = (mu, beta_1..beta_a, log tau2, log phi_1..log phi_a)
// with prior x ~ N(0, I). The likelihood integral over S is estimated with a
// multivariate Student-t proposal centred on a Gaussian approximation of
// S | y built from logit-transformed counts.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psmrwm/random.hpp"
#include "psmrwm/sampler.hpp"

namespace psmrwm {

struct GpParams {
  double mu;
  Eigen::VectorXd beta;
  double tau2;
  Eigen::VectorXd phi;
};

/// x -> (mu, beta, tau2, phi); the number of covariates is (x.size() - 2) / 2.
GpParams param_map(const Eigen::VectorXd& x);
Eigen::VectorXd param_unmap(const GpParams& params);

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& z_points, const Eigen::VectorXd& phi);

struct GridSpec {
  int axes = 4;
  int levels = 3;
  double lo = -0.5;
  double hi = 0.5;
};

/// levels^axes points in lexicographic order (first axis varies slowest).
Eigen::MatrixXd grid_points(const GridSpec& spec);

struct GpDataset {
  Eigen::MatrixXd z_points;  // l x a
  std::vector<int> y;
  int n = 10;
  Eigen::VectorXd true_x;
  std::uint64_t seed = 0;

  std::size_t sites() const { return y.size(); }
  std::size_t covariates() const { return static_cast<std::size_t>(z_points.cols()); }
  std::size_t dimension() const { return 2 + 2 * covariates(); }
};

/// (1/2, -1, 0, 0, 1, 0, 0, 0, 0, 0).
Eigen::VectorXd canonical_true_x();

GpDataset simulate_dataset(const Eigen::VectorXd& true_x, int n, const GridSpec& grid, std::uint64_t seed);

std::string dataset_to_json(const GpDataset& data);
GpDataset dataset_from_json(const std::string& text);
void save_dataset(const std::filesystem::path& path, const GpDataset& data);
GpDataset load_dataset(const std::filesystem::path& path);

struct TransformedCounts {
  Eigen::VectorXd y_star;  // logit(y+ / n)
  Eigen::VectorXd d_inv;   // y+ (1 - y+/n), the inverse pseudo-likelihood variances
};

TransformedCounts transform_counts(std::span<const int> y, int n);

struct ConditionalMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Posterior of S ~ N(0, prior_cov) given r = S + e, e ~ N(0, diag(1/d_inv)).
/// Zero entries of d_inv mean "no information" at that site.
ConditionalMoments gaussian_conditional(const Eigen::MatrixXd& prior_cov, const Eigen::VectorXd& d_inv,
                                        const Eigen::VectorXd& residual);

ConditionalMoments conditional_moments(const Eigen::VectorXd& x, const GpDataset& data);

struct IsConfig {
  int m = 100;
  double nu = 20.0;
  double jitter = 1e-10;  // relative to the mean diagonal
};

/// Lower Cholesky factor; on failure adds jitter * mean(diag) * I, doubling up
/// to six times, before throwing FactorizationError.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& a, double jitter);

/// Per-parameter setup of the importance sampler: factorisations of tau2 R
/// and of the Gaussian approximation's covariance.
class GpImportanceSampler {
 public:
  GpImportanceSampler(const Eigen::VectorXd& x, const GpDataset& data, const IsConfig& config);

  Eigen::VectorXd draw(Rng& rng) const;
  /// log p(y | s, x) + log N(s; 0, tau2 R) - log t_nu(s; mean, cov), binomial
  /// coefficients omitted.
  double log_weight(const Eigen::VectorXd& s) const;
  /// log N(x; 0, I).
  double log_prior() const { return log_prior_; }
  /// log prior + log of the mean of m importance weights.
  double estimate(Rng& rng) const;
  /// As `estimate`, with the proposal draws supplied by the caller.
  double estimate_from_draws(std::span<const Eigen::VectorXd> draws) const;

  const ConditionalMoments& moments() const { return moments_; }

 private:
  const GpDataset& data_;
  IsConfig config_;
  Eigen::VectorXd offset_;  // mu + Z beta
  double log_prior_;
  Eigen::MatrixXd prior_chol_;
  double prior_log_det_half_;
  ConditionalMoments moments_;
  Eigen::MatrixXd prop_chol_;
  double t_log_norm_;
};

double estimate_log_posterior(const Eigen::VectorXd& x, const GpDataset& data, const IsConfig& config,
                              Rng& rng);

class GpLogisticTarget final : public TargetEstimator {
 public:
  GpLogisticTarget(GpDataset data, IsConfig config);

  std::size_t dimension() const override { return data_.dimension(); }
  double estimate_log_target(const Eigen::VectorXd& x, Rng& rng) const override;

  const GpDataset& data() const { return data_; }
  const IsConfig& config() const { return config_; }

 private:
  GpDataset data_;
  IsConfig config_;
};

}  // namespace psmrwm

#pragma once

// Pseudo-marginal random walk Metropolis.
//
// The chain carries (x, log pi_hat(x)). Each iteration proposes
// x* = x + lambda L z with L L' = V_hat, draws one fresh estimate at x*, and
// accepts with probability min(1, pi_hat(x*) / pi_hat(x)). The estimate held
// at the current point is never refreshed.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "psmrwm/noise_models.hpp"
#include "psmrwm/random.hpp"

namespace psmrwm {

class TargetEstimator {
 public:
  virtual ~TargetEstimator() = default;
  virtual std::size_t dimension() const = 0;
  /// One draw of log pi(x) + W, with W fresh on every call.
  virtual double estimate_log_target(const Eigen::VectorXd& x, Rng& rng) const = 0;
};

struct ChainConfig {
  double lambda = 1.0;
  Eigen::MatrixXd v_hat;  // proposal covariance shape, symmetric positive definite
  std::size_t iters = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd initial_x;
};

struct ChainState {
  Eigen::VectorXd x;
  double log_pi_hat;
};

class PseudoMarginalRwm {
 public:
  PseudoMarginalRwm(const TargetEstimator& estimator, double lambda, const Eigen::MatrixXd& v_hat);

  /// Draws the first estimate at x0. Throws ChainAbort if it is NaN or -inf.
  ChainState initialize(const Eigen::VectorXd& x0, Rng& rng) const;

  /// Advances `state` by one iteration and reports whether the move was accepted.
  /// A -inf proposed estimate is rejected; a NaN one throws ChainAbort.
  bool step(ChainState& state, Rng& rng);

  double lambda() const { return lambda_; }
  const Eigen::MatrixXd& cholesky_factor() const { return chol_; }

 private:
  const TargetEstimator& estimator_;
  double lambda_;
  Eigen::MatrixXd chol_;  // lower triangular
  Eigen::VectorXd z_;
  Eigen::VectorXd proposal_;
  std::size_t iteration_ = 0;
};

struct RunResult {
  Eigen::MatrixXd chain;  // iters x d post-move states; empty unless stored
  std::vector<double> log_estimates;
  std::vector<char> accept_flags;
  double sum_sq_jump = 0.0;  // sum over iterations of ||x_{t+1} - x_t||^2
  double wall_seconds = 0.0;
  std::size_t estimator_calls = 0;

  std::size_t iters() const { return accept_flags.size(); }
  double acceptance_rate() const;
  /// Mean squared jump per iteration, including the move out of the initial state.
  double mean_sq_jump() const;
};

struct RunOptions {
  bool store_chain = true;
  // Called after every iteration with (iteration, state, accepted).
  std::function<void(std::size_t, const ChainState&, bool)> on_step;
};

/// Runs `config.iters` iterations. Deterministic in (config, estimator).
RunResult run_chain(const ChainConfig& config, const TargetEstimator& estimator,
                    const RunOptions& options = {});

/// Writes one row per iteration: x1..xd, log_estimate, accepted.
void write_chain_csv(const std::filesystem::path& path, const RunResult& result);

/// lambda = ell / sqrt(s_d).
double scaling_from_ell(double ell, double s_d);

/// Roughness of a product target exp(sum f(x_i)): s_d = -d / E[f''(X)].
double product_roughness(std::size_t d, double mean_second_derivative);

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

/// Exact log-density plus position-independent noise W* ~ g.
class SyntheticNoiseTarget final : public TargetEstimator {
 public:
  SyntheticNoiseTarget(std::size_t dimension, LogDensity base, NoiseModel noise);

  std::size_t dimension() const override { return dim_; }
  double estimate_log_target(const Eigen::VectorXd& x, Rng& rng) const override;

  const NoiseModel& noise() const { return noise_; }
  double base(const Eigen::VectorXd& x) const { return base_(x); }

 private:
  std::size_t dim_;
  LogDensity base_;
  NoiseModel noise_;
};

std::shared_ptr<SyntheticNoiseTarget> synthetic_noise_target(std::size_t dimension, LogDensity base,
                                                             NoiseModel noise);

/// Unnormalised log-density of N(0, I_d): -||x||^2 / 2.
LogDensity standard_normal_product();

}  // namespace psmrwm

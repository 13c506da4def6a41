#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "psmrwm/sampler.hpp"

namespace psmrwm {

/// Effective sample size of series[discard:], using Geyer's initial monotone
/// positive sequence to truncate the autocorrelation sum. Clipped to [1, N].
/// Throws std::invalid_argument for short or constant series.
double ess(std::span<const double> series, std::size_t discard = 0);

struct EssReport {
  std::vector<double> per_component;
  double min_ess = 0.0;
  std::size_t iters_used = 0;
  std::size_t discard = 0;
};

EssReport ess_report(const Eigen::MatrixXd& chain, std::size_t discard);

/// Mean of ||x_{t+1} - x_t||^2 over consecutive rows.
double empirical_esjd(const Eigen::MatrixXd& chain);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;               // unbiased
  std::optional<double> skewness;      // third standardised moment; empty if variance is 0
};

SampleMoments sample_moments(std::span<const double> xs);

struct Kde {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// 0.9 min(sd, IQR/1.34) N^(-1/5).
double silverman_bandwidth(std::span<const double> xs);

/// Gaussian-kernel density estimate on `points` equally spaced points spanning
/// the data +- 4 bandwidths.
Kde gaussian_kde(std::span<const double> xs, int points = 512);

struct NoiseStudyRow {
  int m = 0;
  double variance = 0.0;
  std::optional<double> skewness;
  bool degenerate = false;
  Kde kde;  // of the centred estimates; empty when degenerate
};

using EstimatorFactory = std::function<std::shared_ptr<const TargetEstimator>(int m)>;

/// For each m, `reps` independent log-target estimates at x_ref, centred at
/// their mean.
std::vector<NoiseStudyRow> noise_study(const EstimatorFactory& make, const Eigen::VectorXd& x_ref,
                                       std::span<const int> m_list, std::size_t reps, std::uint64_t seed);

struct CellResult {
  int m = 0;
  double lambda = 0.0;
  double min_ess = 0.0;
  double wall_seconds = 0.0;
  double accept_rate = 0.0;
  double noise_var = 0.0;
};

struct EfficiencyRow {
  CellResult cell;
  double ess_per_s = 0.0;
  double ess_star = 0.0;      // normalised over lambda within m
  double ess_starstar = 0.0;  // normalised over m within lambda
};

struct EfficiencyTable {
  std::vector<EfficiencyRow> rows;  // input order
};

EfficiencyTable relative_efficiencies(std::span<const CellResult> cells);

struct SlopeFit {
  double slope;
  double std_error;
};

/// Least-squares slope of log variance on log m; needs at least three points.
SlopeFit variance_slope(std::span<const double> m_values, std::span<const double> variances);

}  // namespace psmrwm

#pragma once

// Grid experiments over (lambda, m): pilot run for the proposal shape,
// one pseudo-marginal chain per cell, relative efficiency tables and the
// noise study at the pilot mean.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psmrwm/diagnostics.hpp"
#include "psmrwm/gp_logistic.hpp"
#include "psmrwm/sampler.hpp"

namespace psmrwm {

enum class ExperimentMode { gp, synthetic };
enum class TimingMode { wall, cost };

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::gp;
  std::string dataset_path;        // gp mode; simulated from dataset_seed when empty
  std::uint64_t dataset_seed = 1;
  std::vector<double> lambda_list{0.2, 0.4, 0.6, 0.7, 0.8, 1.0, 1.2, 1.4, 1.6};
  std::vector<int> m_list{10, 20, 40, 100, 200, 400, 1000};
  std::size_t iters = 20000;
  std::size_t max_iters = 20000;   // doubling budget per cell
  double min_ess_floor = 1000.0;
  double burn_in_fraction = 0.1;
  std::uint64_t seed = 2024;
  std::string output_dir = "out";
  unsigned threads = 0;            // 0: all available cores
  // "cost" replaces wall seconds by estimator calls x m, so that every
  // output file is a pure function of the config.
  TimingMode timing = TimingMode::wall;
  std::size_t pilot_iters = 20000;
  int pilot_m = 200;
  std::size_t noise_reps = 2000;
  double nu = 20.0;
  // synthetic mode: N(0, I_d) target with Gaussian noise of variance noise_var_scale / m
  std::size_t synthetic_d = 10;
  double noise_var_scale = 10.0;
  bool exact_target = false;       // synthetic mode without noise

  void validate() const;
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

/// Builds estimators for one experiment; m is the Monte Carlo size.
class ExperimentTarget {
 public:
  explicit ExperimentTarget(const ExperimentConfig& config);

  std::shared_ptr<const TargetEstimator> make(int m) const;
  std::size_t dimension() const;
  const GpDataset* dataset() const { return dataset_ ? dataset_.get() : nullptr; }

 private:
  ExperimentConfig config_;
  std::shared_ptr<GpDataset> dataset_;
};

struct PilotResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd v_hat;
  double acceptance_rate = 0.0;
};

/// Two-stage pilot: a chain with V = I and lambda = 0.7 / sqrt(d), then a
/// chain with the first stage's covariance and lambda = 2.38 / sqrt(d). Each
/// stage runs iters / 2 iterations and uses its second half.
PilotResult run_pilot(const TargetEstimator& estimator, std::size_t iters, std::uint64_t seed);

struct CellSummary {
  CellResult result;
  std::size_t iters = 0;
  std::size_t estimator_calls = 0;
  double esjd = 0.0;
  bool budget_exhausted = false;  // min ESS still below the floor at max_iters
};

struct GridOutcome {
  PilotResult pilot;
  std::vector<NoiseStudyRow> noise;
  std::vector<CellSummary> cells;  // m-major, lambda-minor
  EfficiencyTable table;
};

/// Runs the whole study and writes efficiency.csv, cells.csv, noise.csv,
/// noise_kde.csv and pilot.csv into config.output_dir.
GridOutcome run_grid_experiment(const ExperimentConfig& config);

void write_efficiency_csv(const std::filesystem::path& path, const EfficiencyTable& table);
void write_noise_csvs(const std::filesystem::path& dir, const std::vector<NoiseStudyRow>& rows);

}  // namespace psmrwm

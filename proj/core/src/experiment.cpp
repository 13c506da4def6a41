#include "psmrwm/experiment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "psmrwm/csv.hpp"
#include "psmrwm/noise_models.hpp"
#include "psmrwm/parallel.hpp"

namespace psmrwm {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (lambda_list.empty()) throw std::invalid_argument("config: lambda_list is empty");
  if (m_list.empty()) throw std::invalid_argument("config: m_list is empty");
  for (double l : lambda_list)
    if (!(l > 0.0)) throw std::invalid_argument("config: lambda values must be positive");
  for (int m : m_list)
    if (m < 1) throw std::invalid_argument("config: m values must be positive");
  if (iters == 0) throw std::invalid_argument("config: iters must be positive");
  if (max_iters < iters) throw std::invalid_argument("config: max_iters must be at least iters");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
    throw std::invalid_argument("config: burn_in_fraction must be in [0, 1)");
  if (pilot_iters < 40) throw std::invalid_argument("config: pilot_iters too small");
  if (noise_reps < 100) throw std::invalid_argument("config: noise_reps must be at least 100");
  if (mode == ExperimentMode::synthetic && synthetic_d == 0)
    throw std::invalid_argument("config: synthetic_d must be positive");
}

ExperimentConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "mode") {
      const auto s = v.get<std::string>();
      if (s == "gp") c.mode = ExperimentMode::gp;
      else if (s == "synthetic") c.mode = ExperimentMode::synthetic;
      else throw std::invalid_argument("config: unknown mode " + s);
    } else if (key == "dataset_path") c.dataset_path = v.get<std::string>();
    else if (key == "dataset_seed") c.dataset_seed = v.get<std::uint64_t>();
    else if (key == "lambda_list") c.lambda_list = v.get<std::vector<double>>();
    else if (key == "m_list") c.m_list = v.get<std::vector<int>>();
    else if (key == "iters") c.iters = v.get<std::size_t>();
    else if (key == "max_iters") c.max_iters = v.get<std::size_t>();
    else if (key == "min_ess_floor") c.min_ess_floor = v.get<double>();
    else if (key == "burn_in_fraction") c.burn_in_fraction = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "output_dir") c.output_dir = v.get<std::string>();
    else if (key == "threads") c.threads = v.get<unsigned>();
    else if (key == "timing") {
      const auto s = v.get<std::string>();
      if (s == "wall") c.timing = TimingMode::wall;
      else if (s == "cost") c.timing = TimingMode::cost;
      else throw std::invalid_argument("config: unknown timing " + s);
    } else if (key == "pilot_iters") c.pilot_iters = v.get<std::size_t>();
    else if (key == "pilot_m") c.pilot_m = v.get<int>();
    else if (key == "noise_reps") c.noise_reps = v.get<std::size_t>();
    else if (key == "nu") c.nu = v.get<double>();
    else if (key == "synthetic_d") c.synthetic_d = v.get<std::size_t>();
    else if (key == "noise_var_scale") c.noise_var_scale = v.get<double>();
    else if (key == "exact_target") c.exact_target = v.get<bool>();
    else throw std::invalid_argument("config: unknown key " + key);
  }
  // A budget below iters would be rejected; a config that only sets iters
  // means "no doubling".
  if (!j.contains("max_iters")) c.max_iters = c.iters;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["mode"] = c.mode == ExperimentMode::gp ? "gp" : "synthetic";
  j["dataset_path"] = c.dataset_path;
  j["dataset_seed"] = c.dataset_seed;
  j["lambda_list"] = c.lambda_list;
  j["m_list"] = c.m_list;
  j["iters"] = c.iters;
  j["max_iters"] = c.max_iters;
  j["min_ess_floor"] = c.min_ess_floor;
  j["burn_in_fraction"] = c.burn_in_fraction;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["timing"] = c.timing == TimingMode::wall ? "wall" : "cost";
  j["pilot_iters"] = c.pilot_iters;
  j["pilot_m"] = c.pilot_m;
  j["noise_reps"] = c.noise_reps;
  j["nu"] = c.nu;
  j["synthetic_d"] = c.synthetic_d;
  j["noise_var_scale"] = c.noise_var_scale;
  j["exact_target"] = c.exact_target;
  return j.dump(2) + "\n";
}

ExperimentTarget::ExperimentTarget(const ExperimentConfig& config) : config_(config) {
  if (config.mode == ExperimentMode::gp) {
    if (!config.dataset_path.empty() && std::filesystem::exists(config.dataset_path))
      dataset_ = std::make_shared<GpDataset>(load_dataset(config.dataset_path));
    else
      dataset_ = std::make_shared<GpDataset>(simulate_dataset(canonical_true_x(), 10, GridSpec{},
                                                              config.dataset_seed));
  }
}

std::size_t ExperimentTarget::dimension() const {
  return dataset_ ? dataset_->dimension() : config_.synthetic_d;
}

std::shared_ptr<const TargetEstimator> ExperimentTarget::make(int m) const {
  if (dataset_) return std::make_shared<GpLogisticTarget>(*dataset_, IsConfig{m, config_.nu, 1e-10});
  const NoiseModel noise = config_.exact_target
                               ? NoiseModel::none()
                               : NoiseModel::gaussian(std::sqrt(config_.noise_var_scale / m));
  return synthetic_noise_target(config_.synthetic_d, standard_normal_product(), noise);
}

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments second_half_moments(const Eigen::MatrixXd& chain) {
  const Eigen::Index start = chain.rows() / 2;
  const Eigen::MatrixXd tail = chain.bottomRows(chain.rows() - start);
  Moments m;
  m.mean = tail.colwise().mean().transpose();
  const Eigen::MatrixXd centred = tail.rowwise() - m.mean.transpose();
  m.cov = centred.transpose() * centred / static_cast<double>(tail.rows() - 1);
  return m;
}

}  // namespace

PilotResult run_pilot(const TargetEstimator& estimator, std::size_t iters, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(estimator.dimension());
  const double root_d = std::sqrt(static_cast<double>(d));
  const std::size_t stage = iters / 2;

  ChainConfig first;
  first.lambda = 0.7 / root_d;
  first.v_hat = Eigen::MatrixXd::Identity(d, d);
  first.iters = stage;
  first.seed = mix_seed(seed);
  first.initial_x = Eigen::VectorXd::Zero(d);
  const RunResult r1 = run_chain(first, estimator);
  const Moments m1 = second_half_moments(r1.chain);

  ChainConfig second = first;
  second.lambda = 2.38 / root_d;
  second.v_hat = m1.cov;
  second.seed = mix_seed(seed + 1);
  second.initial_x = m1.mean;
  Eigen::LLT<Eigen::MatrixXd> check(second.v_hat);
  if (check.info() != Eigen::Success || !(second.v_hat.diagonal().minCoeff() > 0.0)) {
    // The first stage barely moved; fall back to its proposal.
    second.v_hat = first.v_hat;
    second.lambda = first.lambda;
  }
  const RunResult r2 = run_chain(second, estimator);
  const Moments m2 = second_half_moments(r2.chain);

  PilotResult out{m2.mean, m2.cov, r2.acceptance_rate()};
  Eigen::LLT<Eigen::MatrixXd> final_check(out.v_hat);
  if (final_check.info() != Eigen::Success) out.v_hat = second.v_hat;
  return out;
}

void write_efficiency_csv(const std::filesystem::path& path, const EfficiencyTable& table) {
  CsvWriter csv(path, {"m", "lambda", "min_ess", "wall_s", "ess_per_s", "ess_star", "ess_starstar",
                       "accept_rate", "noise_var"});
  for (const auto& r : table.rows) {
    csv.row({std::to_string(r.cell.m), csv_num(r.cell.lambda), csv_num(r.cell.min_ess),
             csv_num(r.cell.wall_seconds), csv_num(r.ess_per_s), csv_num(r.ess_star),
             csv_num(r.ess_starstar), csv_num(r.cell.accept_rate), csv_num(r.cell.noise_var)});
  }
}

void write_noise_csvs(const std::filesystem::path& dir, const std::vector<NoiseStudyRow>& rows) {
  CsvWriter summary(dir / "noise.csv", {"m", "variance", "skewness", "degenerate"});
  CsvWriter kde(dir / "noise_kde.csv", {"m", "w", "density"});
  for (const auto& r : rows) {
    summary.row({std::to_string(r.m), csv_num(r.variance), r.skewness ? csv_num(*r.skewness) : "",
                 r.degenerate ? "1" : "0"});
    for (std::size_t i = 0; i < r.kde.grid.size(); ++i)
      kde.row({std::to_string(r.m), csv_num(r.kde.grid[i]), csv_num(r.kde.density[i])});
  }
}

GridOutcome run_grid_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::filesystem::path out_dir(config.output_dir);
  std::filesystem::create_directories(out_dir);

  const ExperimentTarget target(config);
  if (target.dataset() && config.dataset_path.empty())
    save_dataset(out_dir / "dataset.json", *target.dataset());

  GridOutcome outcome;
  {
    const auto pilot_estimator = target.make(config.pilot_m);
    outcome.pilot = run_pilot(*pilot_estimator, config.pilot_iters, mix_seed(config.seed ^ 0x5051ULL));
  }
  {
    CsvWriter pilot_csv(out_dir / "pilot.csv", {"row", "mean", "v_hat"});
    const auto d = outcome.pilot.mean.size();
    for (Eigen::Index i = 0; i < d; ++i) {
      std::ostringstream cov;
      for (Eigen::Index j = 0; j < d; ++j) cov << (j ? " " : "") << csv_num(outcome.pilot.v_hat(i, j));
      pilot_csv.row({std::to_string(i + 1), csv_num(outcome.pilot.mean[i]), cov.str()});
    }
  }

  outcome.noise = noise_study([&](int m) { return target.make(m); }, outcome.pilot.mean, config.m_list,
                              config.noise_reps, mix_seed(config.seed ^ 0x4e53ULL));
  write_noise_csvs(out_dir, outcome.noise);

  const std::size_t n_lambda = config.lambda_list.size();
  const std::size_t n_cells = config.m_list.size() * n_lambda;
  outcome.cells.resize(n_cells);
  const unsigned threads = config.threads ? config.threads : default_threads();

  parallel_for(n_cells, threads, [&](std::size_t idx) {
    const std::size_t mi = idx / n_lambda;
    const int m = config.m_list[mi];
    const double lambda = config.lambda_list[idx % n_lambda];
    const auto estimator = target.make(m);

    ChainConfig cc;
    cc.lambda = lambda;
    cc.v_hat = outcome.pilot.v_hat;
    cc.seed = cell_seed(config.seed, idx);
    cc.initial_x = outcome.pilot.mean;

    CellSummary& cell = outcome.cells[idx];
    cell.result.m = m;
    cell.result.lambda = lambda;
    cell.result.noise_var = outcome.noise[mi].variance;
    // The chain is a deterministic function of its seed, so a longer rerun
    // extends the shorter one exactly.
    for (std::size_t n = config.iters;; n *= 2) {
      cc.iters = std::min(n, config.max_iters);
      const RunResult run = run_chain(cc, *estimator);
      const auto discard = static_cast<std::size_t>(config.burn_in_fraction * static_cast<double>(cc.iters));
      double min_ess = 0.0;
      try {
        min_ess = ess_report(run.chain, discard).min_ess;
      } catch (const std::invalid_argument&) {
        min_ess = 0.0;  // no accepted move after burn-in
      }
      cell.iters = cc.iters;
      cell.estimator_calls = run.estimator_calls;
      cell.esjd = run.mean_sq_jump();
      cell.result.min_ess = min_ess;
      cell.result.accept_rate = run.acceptance_rate();
      cell.result.wall_seconds = config.timing == TimingMode::wall
                                     ? run.wall_seconds
                                     : static_cast<double>(run.estimator_calls) *
                                           (config.mode == ExperimentMode::gp || !config.exact_target ? m : 1);
      cell.budget_exhausted = min_ess < config.min_ess_floor && cc.iters >= config.max_iters;
      if (min_ess >= config.min_ess_floor || cc.iters >= config.max_iters) break;
    }
  });

  std::vector<CellResult> results;
  for (const auto& c : outcome.cells) results.push_back(c.result);
  outcome.table = relative_efficiencies(results);
  write_efficiency_csv(out_dir / "efficiency.csv", outcome.table);

  CsvWriter cells_csv(out_dir / "cells.csv", {"m", "lambda", "iters", "estimator_calls", "min_ess", "accept_rate",
                                              "esjd", "wall_s", "budget_exhausted"});
  for (const auto& c : outcome.cells) {
    cells_csv.row({std::to_string(c.result.m), csv_num(c.result.lambda), std::to_string(c.iters),
                   std::to_string(c.estimator_calls), csv_num(c.result.min_ess), csv_num(c.result.accept_rate),
                   csv_num(c.esjd), csv_num(c.result.wall_seconds), c.budget_exhausted ? "1" : "0"});
  }
  return outcome;
}

}  // namespace psmrwm

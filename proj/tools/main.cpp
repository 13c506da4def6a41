#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psmrwm/csv.hpp"
#include "psmrwm/diagnostics.hpp"
#include "psmrwm/efficiency_theory.hpp"
#include "psmrwm/errors.hpp"
#include "psmrwm/experiment.hpp"
#include "psmrwm/gp_logistic.hpp"
#include "psmrwm/noise_models.hpp"
#include "psmrwm/parallel.hpp"
#include "psmrwm/sampler.hpp"

namespace fs = std::filesystem;
using namespace psmrwm;

namespace {

struct NoiseArgs {
  std::string kind = "gaussian";
  double sigma = 1.0;
  double scale = 0.5;
  double eps = 0.1;
  double pstar = 0.5;
  std::string samples;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--noise", kind, "none | gaussian | laplace | twopoint | empirical")
        ->check(CLI::IsMember({"none", "gaussian", "laplace", "twopoint", "empirical"}));
    cmd->add_option("--sigma", sigma, "Gaussian standard deviation");
    cmd->add_option("--scale", scale, "Laplace scale in (0, 1)");
    cmd->add_option("--eps", eps, "two-point low value");
    cmd->add_option("--pstar", pstar, "two-point probability of the low value");
    cmd->add_option("--samples", samples, "CSV with a w_star column (empirical noise)");
  }

  NoiseModel build() const {
    if (kind == "none") return NoiseModel::none();
    if (kind == "gaussian") return NoiseModel::gaussian(sigma);
    if (kind == "laplace") return NoiseModel::laplace(scale);
    if (kind == "twopoint") return NoiseModel::two_point(eps, pstar);
    if (samples.empty()) throw std::invalid_argument("--noise empirical needs --samples");
    return NoiseModel::empirical(read_w_star_csv(samples));
  }
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(std::stoi(item));
  if (out.empty()) throw std::invalid_argument("empty list: " + text);
  return out;
}

void report(const std::string& what, bool ok) {
  std::printf("%-40s %s\n", what.c_str(), ok ? "ok" : "FAILED");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-marginal random walk Metropolis: scaling theory, sampler and GP study"};
  app.require_subcommand(1);
  std::string out_dir = "out";
  app.add_option("--out-dir", out_dir, "directory for CSV output");

  // theory
  auto* theory = app.add_subcommand("theory", "efficiency functions and optimal scaling");
  theory->require_subcommand(1);

  NoiseArgs curve_noise;
  double lmin = 0.5, lmax = 5.0;
  int steps = 100;
  auto* curve = theory->add_subcommand("curve", "J(l) on an equally spaced grid");
  curve_noise.add_to(curve);
  curve->add_option("--lmin", lmin);
  curve->add_option("--lmax", lmax);
  curve->add_option("--steps", steps);

  NoiseArgs opt_noise;
  double range_lo = 0.05, range_hi = 10.0;
  auto* optimal = theory->add_subcommand("optimal", "maximiser of J");
  opt_noise.add_to(optimal);
  optimal->add_option("--lo", range_lo);
  optimal->add_option("--hi", range_hi);

  int scan_grid = 19;
  unsigned scan_threads = 0;
  auto* scan = theory->add_subcommand("scan-twopoint", "optimal scaling over a grid of two-point noise");
  scan->add_option("--grid", scan_grid, "points per axis on (0, 1)");
  scan->add_option("--threads", scan_threads);

  CertifyOptions certify_opts;
  auto* certify = theory->add_subcommand("certify", "check the scaling bounds on the built-in log-concave suite");
  certify->add_option("--grid-points", certify_opts.grid_points);
  certify->add_option("--tol", certify_opts.tol);

  double lemma_tol = 1e-5;
  auto* lemma = app.add_subcommand("verify-lemma", "numerical certificate for the properties of f");
  lemma->add_option("--tol", lemma_tol, "relative tolerance for the finite-difference checks");

  // sample
  auto* sample = app.add_subcommand("sample", "run chains");
  sample->require_subcommand(1);
  std::size_t syn_d = 100, syn_iters = 100000;
  double syn_sigma = 1.0, syn_ell = 2.38;
  std::uint64_t syn_seed = 1;
  std::string syn_chain;
  auto* synthetic = sample->add_subcommand("synthetic", "N(0, I_d) target with Gaussian log-noise");
  synthetic->add_option("--d", syn_d);
  synthetic->add_option("--sigma", syn_sigma);
  synthetic->add_option("--ell", syn_ell);
  synthetic->add_option("--iters", syn_iters);
  synthetic->add_option("--seed", syn_seed);
  synthetic->add_option("--save-chain", syn_chain, "write the full chain to this CSV");

  // gp
  auto* gp = app.add_subcommand("gp", "Gaussian process logistic regression study");
  gp->require_subcommand(1);
  std::uint64_t sim_seed = 1;
  std::string sim_out = "dataset.json";
  auto* simulate = gp->add_subcommand("simulate", "simulate the canonical dataset");
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--out", sim_out);

  std::string run_data;
  double run_lambda = 0.7;
  int run_m = 100;
  std::size_t run_iters = 20000, run_pilot_iters = 20000;
  std::uint64_t run_seed = 1;
  auto* run = gp->add_subcommand("run", "one chain after a pilot run");
  run->add_option("--data", run_data)->required();
  run->add_option("--lambda", run_lambda);
  run->add_option("--m", run_m);
  run->add_option("--iters", run_iters);
  run->add_option("--seed", run_seed);
  run->add_option("--pilot-iters", run_pilot_iters, "0 uses V = I started at the origin");

  std::string grid_config;
  unsigned grid_threads = 0;
  auto* grid = gp->add_subcommand("grid", "lambda x m grid study from a JSON config");
  grid->add_option("--config", grid_config)->required();
  grid->add_option("--threads", grid_threads, "override the config");

  std::string ns_data, ns_m_list = "20,100";
  std::size_t ns_reps = 2000, ns_pilot_iters = 20000;
  std::uint64_t ns_seed = 1;
  auto* noise_study_cmd = gp->add_subcommand("noise-study", "log-estimate noise at the pilot mean");
  noise_study_cmd->add_option("--data", ns_data)->required();
  noise_study_cmd->add_option("--m-list", ns_m_list, "comma separated");
  noise_study_cmd->add_option("--reps", ns_reps);
  noise_study_cmd->add_option("--seed", ns_seed);
  noise_study_cmd->add_option("--pilot-iters", ns_pilot_iters, "0 uses the dataset's true parameters");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out(out_dir);
    bool ok = true;

    if (*curve) {
      const auto noise = curve_noise.build();
      const auto c = efficiency_curve(noise, lmin, lmax, steps);
      CsvWriter csv(out / "curve.csv", {"noise", "ell", "j"});
      for (std::size_t i = 0; i < c.ells.size(); ++i) csv.row({c.noise, csv_num(c.ells[i]), csv_num(c.j_values[i])});
      std::printf("%s: ell_hat %.6f J %.6f\n", c.noise.c_str(), c.ell_hat, c.j_at_ell_hat);
    } else if (*optimal) {
      const auto noise = opt_noise.build();
      const auto o = optimal_scaling(noise, ScalingRange{range_lo, range_hi});
      CsvWriter csv(out / "optimal.csv", {"noise", "ell_hat", "j_hat", "accept_rate"});
      csv.row({noise.descriptor(), csv_num(o.ell_hat), csv_num(o.j_hat), csv_num(o.j_hat / (o.ell_hat * o.ell_hat))});
      std::printf("%s: ell_hat %.6f J %.6f\n", noise.descriptor().c_str(), o.ell_hat, o.j_hat);
      ok = o.ell_hat >= ell_hat_infty() - 1e-3;
      report("ell_hat >= noiseless optimum", ok);
    } else if (*scan) {
      const auto g = unit_grid(scan_grid);
      const auto s = twopoint_scan(g, g, scan_threads ? scan_threads : default_threads());
      CsvWriter csv(out / "scan_twopoint.csv", {"eps", "pstar", "ell_hat"});
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t i = 0; i < s.eps.size(); ++i)
        for (std::size_t j = 0; j < s.pstar.size(); ++j) {
          csv.row({csv_num(s.eps[i]), csv_num(s.pstar[j]), csv_num(s.at(i, j))});
          lo = std::min(lo, s.at(i, j));
          hi = std::max(hi, s.at(i, j));
        }
      std::printf("ell_hat range [%.4f, %.4f]\n", lo, hi);
      ok = lo >= ell_hat_infty() - 1e-3;
      report("every ell_hat >= noiseless optimum", ok);
    } else if (*certify) {
      std::vector<NoiseModel> suite{NoiseModel::none()};
      for (double s : {0.5, 1.0, 2.0, 3.0}) suite.push_back(NoiseModel::gaussian(s));
      for (double s : {0.3, 0.6}) suite.push_back(NoiseModel::laplace(s));
      CsvWriter csv(out / "certificate.csv", {"noise", "ell_hat", "j_hat", "lower_ok", "upper_ok", "ratio_min",
                                             "ratio_lo", "ratio_hi", "ratio_ok", "envelope_ok", "weak_condition",
                                             "passed"});
      for (const auto& noise : suite) {
        const auto c = certify_theorem(noise, certify_opts);
        csv.row({c.noise, csv_num(c.ell_hat), csv_num(c.j_hat), c.lower_ok ? "1" : "0", c.upper_ok ? "1" : "0",
                 csv_num(c.ratio_min), csv_num(c.ratio_lo), csv_num(c.ratio_hi), c.ratio_ok ? "1" : "0",
                 c.envelope_ok ? "1" : "0", c.weak_condition ? csv_num(*c.weak_condition) : "",
                 c.passed() ? "1" : "0"});
        report(c.noise, c.passed());
        if (c.violation)
          std::printf("  %s at (%.4f, %.4f): %.6f\n", c.violation->what.c_str(), c.violation->ell1,
                      c.violation->ell2, c.violation->ratio);
        ok = ok && c.passed();
      }
    } else if (*lemma) {
      const auto r = verify_lemma();
      CsvWriter csv(out / "lemma.csv", {"quantity", "value"});
      const std::vector<std::pair<std::string, double>> rows{
          {"points", static_cast<double>(r.points)},
          {"min_lower_margin", r.min_lower_margin},
          {"min_log_upper_margin", r.min_log_upper_margin},
          {"max_identity_error", r.max_identity_error},
          {"max_limit_df_db", r.max_limit_df_db},
          {"max_df_db", r.max_df_db},
          {"max_fd_error_dl", r.max_fd_error_dl},
          {"max_fd_error_db", r.max_fd_error_db},
          {"max_fd_error_dbb", r.max_fd_error_dbb}};
      for (const auto& [k, v] : rows) {
        csv.row({k, csv_num(v)});
        std::printf("%-22s %.4g\n", k.c_str(), v);
      }
      ok = r.passed(lemma_tol);
      report("all properties hold on the grid", ok);
    } else if (*synthetic) {
      const auto target = synthetic_noise_target(syn_d, standard_normal_product(), NoiseModel::gaussian(syn_sigma));
      ChainConfig cc;
      const auto d = static_cast<Eigen::Index>(syn_d);
      cc.lambda = scaling_from_ell(syn_ell, static_cast<double>(syn_d));
      cc.v_hat = Eigen::MatrixXd::Identity(d, d);
      cc.iters = syn_iters;
      cc.seed = syn_seed;
      // Start in stationarity so that no burn-in is needed.
      Rng init(mix_seed(syn_seed));
      std::normal_distribution<double> normal;
      cc.initial_x.resize(d);
      for (Eigen::Index i = 0; i < d; ++i) cc.initial_x[i] = normal(init);
      const auto result = run_chain(cc, *target, RunOptions{!syn_chain.empty(), {}});
      if (!syn_chain.empty()) write_chain_csv(syn_chain, result);
      const double j = j_gaussian_closed_form(syn_sigma, syn_ell);
      CsvWriter csv(out / "synthetic.csv", {"d", "sigma", "ell", "iters", "accept_rate", "accept_theory",
                                           "esjd_times_d", "j_theory", "wall_s"});
      csv.row({std::to_string(syn_d), csv_num(syn_sigma), csv_num(syn_ell), std::to_string(syn_iters),
               csv_num(result.acceptance_rate()), csv_num(j / (syn_ell * syn_ell)), csv_num(result.mean_sq_jump()),
               csv_num(j), csv_num(result.wall_seconds)});
      std::printf("acceptance %.4f (theory %.4f), esjd x d %.4f (theory %.4f)\n", result.acceptance_rate(),
                  j / (syn_ell * syn_ell), result.mean_sq_jump(), j);
    } else if (*simulate) {
      const auto data = simulate_dataset(canonical_true_x(), 10, GridSpec{}, sim_seed);
      save_dataset(sim_out, data);
      std::printf("wrote %zu sites to %s\n", data.sites(), sim_out.c_str());
    } else if (*run) {
      const auto data = load_dataset(run_data);
      const GpLogisticTarget target(data, IsConfig{run_m, 20.0, 1e-10});
      const auto d = static_cast<Eigen::Index>(data.dimension());
      ChainConfig cc;
      cc.lambda = run_lambda;
      cc.iters = run_iters;
      cc.seed = run_seed;
      if (run_pilot_iters > 0) {
        const GpLogisticTarget pilot_target(data, IsConfig{200, 20.0, 1e-10});
        const auto pilot = run_pilot(pilot_target, run_pilot_iters, mix_seed(run_seed ^ 0x5051ULL));
        cc.v_hat = pilot.v_hat;
        cc.initial_x = pilot.mean;
      } else {
        cc.v_hat = Eigen::MatrixXd::Identity(d, d);
        cc.initial_x = Eigen::VectorXd::Zero(d);
      }
      const auto result = run_chain(cc, target);
      write_chain_csv(out / "chain.csv", result);
      const auto ess = ess_report(result.chain, run_iters / 10);
      CsvWriter csv(out / "run.csv", {"m", "lambda", "iters", "accept_rate", "min_ess", "wall_s"});
      csv.row({std::to_string(run_m), csv_num(run_lambda), std::to_string(run_iters),
               csv_num(result.acceptance_rate()), csv_num(ess.min_ess), csv_num(result.wall_seconds)});
      std::printf("acceptance %.4f, min ESS %.1f, %.1f s\n", result.acceptance_rate(), ess.min_ess,
                  result.wall_seconds);
    } else if (*grid) {
      auto config = load_config(grid_config);
      if (grid_threads) config.threads = grid_threads;
      const auto outcome = run_grid_experiment(config);
      for (const auto& r : outcome.table.rows)
        std::printf("m=%-5d lambda=%-4g min_ess=%-8.1f ess*=%.3f ess**=%.3f accept=%.3f\n", r.cell.m,
                    r.cell.lambda, r.cell.min_ess, r.ess_star, r.ess_starstar, r.cell.accept_rate);
      for (const auto& c : outcome.cells)
        if (c.budget_exhausted)
          std::printf("note: m=%d lambda=%g stopped at the iteration budget below the ESS floor\n", c.result.m,
                      c.result.lambda);
    } else if (*noise_study_cmd) {
      const auto data = load_dataset(ns_data);
      Eigen::VectorXd x_ref = data.true_x;
      if (ns_pilot_iters > 0) {
        const GpLogisticTarget pilot_target(data, IsConfig{200, 20.0, 1e-10});
        x_ref = run_pilot(pilot_target, ns_pilot_iters, mix_seed(ns_seed ^ 0x5051ULL)).mean;
      }
      const auto m_list = parse_int_list(ns_m_list);
      const auto rows = noise_study(
          [&](int m) { return std::make_shared<GpLogisticTarget>(data, IsConfig{m, 20.0, 1e-10}); }, x_ref, m_list,
          ns_reps, ns_seed);
      write_noise_csvs(out, rows);
      std::vector<double> ms, vars;
      for (const auto& r : rows) {
        std::printf("m=%-5d variance %.5f skewness %s\n", r.m, r.variance,
                    r.skewness ? std::to_string(*r.skewness).c_str() : "undefined");
        if (r.variance > 0.0) {
          ms.push_back(r.m);
          vars.push_back(r.variance);
        }
      }
      if (ms.size() >= 3) {
        const auto fit = variance_slope(ms, vars);
        std::printf("log-variance slope in log m: %.3f (se %.3f)\n", fit.slope, fit.std_error);
      }
    }
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

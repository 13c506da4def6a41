// Acceptance suite: one PASS/FAIL line per criterion, exit code 0 iff all pass.
// Usage: acceptance [output_dir] [--only N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "psmrwm/diagnostics.hpp"
#include "psmrwm/efficiency_theory.hpp"
#include "psmrwm/experiment.hpp"
#include "psmrwm/gp_logistic.hpp"
#include "psmrwm/noise_models.hpp"
#include "psmrwm/parallel.hpp"
#include "psmrwm/sampler.hpp"

using namespace psmrwm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path g_out = "acceptance_out";

Outcome optimal_noiseless() {
  const auto o = optimal_scaling(NoiseModel::none());
  return {std::abs(o.ell_hat - 2.38) <= 0.01, fmt("ell_hat=%.5f J=%.6f", o.ell_hat, o.j_hat)};
}

const std::vector<double> kSigmas{0.25, 0.5, 1.0, 1.5, 2.0, 3.0};

Outcome gaussian_bounds() {
  bool ok = true;
  std::string d;
  for (double s : kSigmas) {
    const auto o = optimal_scaling(NoiseModel::gaussian(s));
    ok = ok && o.ell_hat >= 2.380 - 1e-3 && o.ell_hat <= 2.8285 + 1e-3;
    d += fmt("s=%g:%.4f ", s, o.ell_hat);
  }
  return {ok, d};
}

Outcome ratio_bounds() {
  std::vector<NoiseModel> suite;
  for (double s : kSigmas) suite.push_back(NoiseModel::gaussian(s));
  suite.push_back(NoiseModel::laplace(0.3));
  suite.push_back(NoiseModel::laplace(0.6));
  const auto env = ratio_envelope();
  bool ok = true;
  double worst = 1.0, lo = INFINITY, hi = -INFINITY;
  for (const auto& n : suite) {
    const auto c = certify_theorem(n);
    ok = ok && c.ratio_ok && c.envelope_ok;
    worst = std::min(worst, c.ratio_min);
    lo = std::min(lo, c.ratio_lo);
    hi = std::max(hi, c.ratio_hi);
  }
  return {ok, fmt("min ratio %.4f; J(l2)/J(l1) in [%.4f, %.4f] vs envelope [%.4f, %.4f]", worst, lo, hi, env.lower,
                  env.upper)};
}

Outcome twopoint_band() {
  const auto g = unit_grid(19);
  const auto s = twopoint_scan(g, g, default_threads());
  double lo = INFINITY, hi = -INFINITY;
  for (double v : s.ell_hat) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo > 2.37 && hi < 2.65, fmt("ell_hat range [%.4f, %.4f] over 361 cells", lo, hi)};
}

Outcome lemma() {
  const auto r = verify_lemma();
  return {r.passed(1e-5), fmt("%zu points; min lower margin %.3g; fd errors %.2g %.2g %.2g; identity %.2g", r.points,
                              r.min_lower_margin, r.max_fd_error_dl, r.max_fd_error_db, r.max_fd_error_dbb,
                              r.max_identity_error)};
}

Outcome theory_vs_simulation() {
  const std::size_t d = 100;
  const auto noise = NoiseModel::gaussian(1.0);
  const auto target = synthetic_noise_target(d, standard_normal_product(), noise);
  const EsjdFunction j(noise);
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 600;
  for (double ell : {2.0, 2.38, 2.8}) {
    ChainConfig c;
    c.lambda = scaling_from_ell(ell, static_cast<double>(d));
    c.v_hat = Eigen::MatrixXd::Identity(d, d);
    c.iters = 1000000;
    c.seed = ++seed;
    Rng init(mix_seed(seed));
    std::normal_distribution<double> normal;
    c.initial_x.resize(d);
    for (auto& v : c.initial_x) v = normal(init);
    const auto r = run_chain(c, *target, RunOptions{false, {}});
    const double jl = j(ell);
    const double acc_theory = jl / (ell * ell);
    const double esjd_d = r.mean_sq_jump();  // per-component ESJD times d
    const bool acc_ok = std::abs(r.acceptance_rate() - acc_theory) <= 0.01;
    const bool esjd_ok = std::abs(esjd_d / jl - 1.0) <= 0.05;
    ok = ok && acc_ok && esjd_ok;
    detail += fmt("l=%g acc %.4f/%.4f esjd*d %.4f/%.4f; ", ell, r.acceptance_rate(), acc_theory, esjd_d, jl);
  }
  return {ok, detail};
}

Outcome gp_desk_study() {
  ExperimentConfig c;
  c.mode = ExperimentMode::gp;
  c.lambda_list = {0.4, 0.6, 0.8, 1.0, 1.2};
  c.m_list = {20, 100};
  c.iters = c.max_iters = 20000;
  c.output_dir = (g_out / "gp_desk").string();
  const auto out = run_grid_experiment(c);

  bool a = true, b = true;
  std::string detail;
  for (int m : c.m_list) {
    double best = -1, arg = 0;
    for (const auto& r : out.table.rows)
      if (r.cell.m == m && r.ess_star > best) {
        best = r.ess_star;
        arg = r.cell.lambda;
      }
    a = a && arg >= 0.4 && arg <= 1.0;
    detail += fmt("m=%d argmax %.1f ESS*(", m, arg);
    for (const auto& r : out.table.rows)
      if (r.cell.m == m) {
        detail += fmt("%.2f ", r.ess_star);
        if (r.cell.lambda == 0.6 || r.cell.lambda == 0.8) b = b && r.ess_star >= 0.6;
      }
    detail.back() = ')';
    detail += "; ";
  }
  const auto& n20 = out.noise[0];
  const auto& n100 = out.noise[1];
  const bool cvar = n20.variance > n100.variance;
  const bool dskew = n20.skewness && n100.skewness && *n20.skewness > 0 && *n100.skewness > 0;
  detail += fmt("var %.3f -> %.3f; skew %.3f, %.3f; (a)%s (b)%s (c)%s (d)%s", n20.variance, n100.variance,
                n20.skewness.value_or(NAN), n100.skewness.value_or(NAN), a ? "ok" : "FAIL", b ? "ok" : "FAIL",
                cvar ? "ok" : "FAIL", dskew ? "ok" : "FAIL");
  return {a && b && cvar && dskew, detail};
}

Outcome property_suites() {
  std::string detail;
  bool ok = true;

  // unbiasedness and h-symmetry
  double worst_unb = 0, worst_sym = 0;
  for (const auto& n : {NoiseModel::gaussian(0.5), NoiseModel::gaussian(1), NoiseModel::gaussian(3),
                        NoiseModel::laplace(0.3), NoiseModel::laplace(0.6)}) {
    worst_unb = std::max(worst_unb, std::abs(unbiasedness_integral(n) - 1.0));
    for (double b : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      worst_sym = std::max(worst_sym, std::abs(h_value(n, b) - h_value(n, -b)));
      worst_sym = std::max(worst_sym, std::abs(std::exp(b / 2) * rho(n, b) - std::exp(-b / 2) * rho(n, -b)));
    }
  }
  ok = ok && worst_unb <= 1e-8 && worst_sym < 1e-10;
  detail += fmt("unbiasedness %.1e, h-symmetry %.1e; ", worst_unb, worst_sym);

  // stationary marginal of a noisy chain
  {
    const std::size_t d = 50;
    const auto t = synthetic_noise_target(d, standard_normal_product(), NoiseModel::gaussian(1.5));
    ChainConfig c;
    c.lambda = scaling_from_ell(2.38, 50.0);
    c.v_hat = Eigen::MatrixXd::Identity(d, d);
    c.iters = 400000;
    c.seed = 801;
    Rng init(mix_seed(801));
    std::normal_distribution<double> normal;
    c.initial_x.resize(d);
    for (auto& v : c.initial_x) v = normal(init);
    double s1 = 0, s2 = 0;
    run_chain(c, *t, RunOptions{false, [&](std::size_t, const ChainState& s, bool) {
                                  s1 += s.x[0];
                                  s2 += s.x[0] * s.x[0];
                                }});
    const double n = static_cast<double>(c.iters);
    const double var = s2 / n - (s1 / n) * (s1 / n);
    ok = ok && std::abs(var - 1.0) <= 0.05;
    detail += fmt("marginal var %.3f; ", var);
  }

  // ESS against AR(1)
  {
    double worst = 0;
    for (double rho_ : {0.0, 0.3, 0.5, 0.8}) {
      Rng rng(900 + static_cast<std::uint64_t>(rho_ * 10));
      std::normal_distribution<double> normal;
      std::vector<double> x(100000);
      double v = normal(rng) / std::sqrt(1 - rho_ * rho_);
      for (auto& e : x) {
        v = rho_ * v + normal(rng);
        e = v;
      }
      const double expected = (1 - rho_) / (1 + rho_);
      worst = std::max(worst, std::abs(ess(x) / 1e5 / expected - 1.0));
    }
    ok = ok && worst < 0.10;
    detail += fmt("AR(1) ESS rel err %.3f; ", worst);
  }

  // conditional moments against the joint-Gaussian oracle
  {
    Rng rng(1000);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.2, 3.0);
    double worst = 0;
    const Eigen::Index l = 4;
    for (int rep = 0; rep < 100; ++rep) {
      Eigen::MatrixXd a(l, l);
      for (auto& v : a.reshaped()) v = normal(rng);
      const Eigen::MatrixXd k = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(l, l);
      Eigen::VectorXd d_inv(l), r(l);
      for (Eigen::Index i = 0; i < l; ++i) {
        d_inv[i] = unif(rng);
        r[i] = normal(rng);
      }
      Eigen::MatrixXd s22 = k;
      s22.diagonal() += d_inv.cwiseInverse();
      const Eigen::MatrixXd s22_inv = s22.inverse();
      const Eigen::VectorXd mean = k * s22_inv * r;
      const Eigen::MatrixXd cov = k - k * s22_inv * k;
      const auto got = gaussian_conditional(k, d_inv, r);
      worst = std::max({worst, (got.mean - mean).cwiseAbs().maxCoeff(), (got.cov - cov).cwiseAbs().maxCoeff()});
    }
    ok = ok && worst < 1e-10;
    detail += fmt("conditioning err %.1e; ", worst);
  }

  // byte-identical re-runs
  {
    ExperimentConfig c;
    c.mode = ExperimentMode::synthetic;
    c.synthetic_d = 5;
    c.lambda_list = {0.5, 1.0};
    c.m_list = {10, 50};
    c.iters = 4000;
    c.max_iters = 16000;
    c.pilot_iters = 4000;
    c.noise_reps = 500;
    c.timing = TimingMode::cost;
    bool same = true;
    std::vector<std::string> first;
    for (int run = 0; run < 2; ++run) {
      c.output_dir = (g_out / ("rerun" + std::to_string(run))).string();
      fs::remove_all(c.output_dir);
      run_grid_experiment(c);
      int i = 0;
      for (const char* f : {"efficiency.csv", "cells.csv", "noise.csv", "noise_kde.csv", "pilot.csv"}) {
        const auto text = slurp(fs::path(c.output_dir) / f);
        if (run == 0) first.push_back(text);
        else same = same && text == first[static_cast<std::size_t>(i)];
        ++i;
      }
    }
    ok = ok && same;
    detail += same ? "re-run byte-identical" : "re-run DIFFERS";
  }
  return {ok, detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    else g_out = argv[i];
  }
  fs::create_directories(g_out);

  const std::vector<Criterion> criteria{
      {1, "noiseless optimal scaling 2.38 +- 0.01", 1, optimal_noiseless},
      {2, "gaussian noise: ell_hat in [2.380, 2.8285]", 10, gaussian_bounds},
      {3, "efficiency ratio > 0.70 and inside the envelope", 10, ratio_bounds},
      {4, "two-point 19x19 scan inside (2.37, 2.65)", 120, twopoint_band},
      {5, "kernel properties certificate", 30, lemma},
      {6, "theory vs simulation, d=100", 300, theory_vs_simulation},
      {7, "GP desk-scale study", 1800, gp_desk_study},
      {8, "property suites", 300, property_suites},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%s] criterion %d: %s (%.1f s of %.0f s) | %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.budget_s, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

#include "psmrwm/efficiency_theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "psmrwm/errors.hpp"
#include "psmrwm/normal.hpp"
#include "psmrwm/parallel.hpp"
#include "psmrwm/quadrature.hpp"

namespace psmrwm {

namespace {

constexpr double kInvPhi = 0.61803398874989484820;  // 1/golden ratio

void require_positive_ell(double ell) {
  if (!(ell > 0.0) || !std::isfinite(ell)) throw std::domain_error("scaling ell must be positive and finite");
}

// Largest b worth integrating over: h falls below 1e-14 of h(0) beyond it.
double h_support_bound(const NoiseModel& noise) {
  const auto [lo, hi] = noise.support();
  const double span = hi - lo;
  const double h0 = h_value(noise, 0.0);
  double b = 0.5;
  while (b < span && h_value(noise, b) > 1e-14 * h0) b *= 1.5;
  return std::min(b, span);
}

// Panel edges on [0, b_max]: geometric near zero, where f(., l) changes on the
// scale of l, then uniform.
std::vector<double> b_panel_edges(double b_max) {
  std::vector<double> edges{0.0};
  const double geo_end = std::min(1.0, b_max / 20.0);
  for (double e = 1e-3; e < geo_end; e *= 1.5) edges.push_back(e);
  const double start = edges.back();
  const double width = std::min(0.25, b_max / 100.0);
  const int n = std::max(1, static_cast<int>(std::ceil((b_max - start) / width)));
  for (int i = 1; i <= n; ++i) edges.push_back(start + (b_max - start) * i / n);
  return edges;
}

}  // namespace

double j_infty(double ell) {
  require_positive_ell(ell);
  return 2.0 * ell * ell * norm_cdf(-0.5 * ell);
}

LogJDerivatives dlog_j_infty(double ell) {
  require_positive_ell(ell);
  const double u = 0.5 * ell;
  const double phi = norm_pdf(u);
  const double tail = norm_cdf(-u);
  const double first = 2.0 / ell - phi / (2.0 * tail);
  const double second = -2.0 / (ell * ell) - phi / (4.0 * tail * tail) * (phi - u * tail);
  return {first, second};
}

FBundle f_bundle(double b, double ell) {
  require_positive_ell(ell);
  if (!(b >= 0.0)) throw std::domain_error("f_bundle requires b >= 0");
  const double l2 = ell * ell;
  const double log_a = -0.5 * b + norm_log_cdf(b / ell - 0.5 * ell);
  const double log_c = 0.5 * b + norm_log_cdf(-b / ell - 0.5 * ell);
  const double a = std::exp(log_a);
  const double c = std::exp(log_c);
  const double log_kernel = norm_log_pdf(0.5 * ell) - b * b / (2.0 * l2);
  const double kernel = std::exp(log_kernel);

  FBundle out;
  out.f = l2 * (a + c);
  out.log_f = 2.0 * std::log(ell) + log_add_exp(log_a, log_c);
  out.df_db = 0.5 * l2 * (c - a);
  out.df_dl = 2.0 / ell * out.f - l2 * kernel;
  out.d2f_db2 = 0.25 * out.f - ell * kernel;
  out.log_kernel = log_kernel;
  return out;
}

double j_twopoint(double epsilon, double p_star, double ell) {
  require_positive_ell(ell);
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(p_star > 0.0 && p_star < 1.0))
    throw std::domain_error("j_twopoint: epsilon and p_star must lie in (0, 1)");
  const double a = (1.0 - p_star * epsilon) / (1.0 - p_star);
  const double k = std::log(a) - std::log(epsilon);
  const double p = p_star * epsilon;
  const double half = 0.5 * ell;
  return 2.0 * ell * ell *
         (p_star * (1.0 - p) * norm_cdf(-k / ell - half) +
          (p_star * p + (1.0 - p_star) * (1.0 - p)) * norm_cdf(-half) +
          (1.0 - p_star) * p * norm_cdf(k / ell - half));
}

double j_gaussian_closed_form(double sigma, double ell) {
  require_positive_ell(ell);
  const double s2 = sigma * sigma;
  const double z = (-s2 / ell - 0.5 * ell) / std::sqrt(1.0 + 2.0 * s2 / (ell * ell));
  return 2.0 * ell * ell * norm_cdf(z);
}

EsjdFunction::EsjdFunction(NoiseModel noise, EsjdOptions opts) : noise_(std::move(noise)), opts_(opts) {
  if (noise_.is_continuous()) {
    b_max_ = h_support_bound(noise_);
    const auto edges = b_panel_edges(b_max_);
    constexpr int kN = GaussKronrod15::kNodes;
    nodes_.reserve((edges.size() - 1) * kN);
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double mid = 0.5 * (edges[p] + edges[p + 1]);
      const double half = 0.5 * (edges[p + 1] - edges[p]);
      for (int k = 0; k < kN; ++k) {
        const double b = mid + half * GaussKronrod15::kAbscissae[k];
        const double h = h_value(noise_, b);
        nodes_.push_back(b);
        kronrod_w_.push_back(half * GaussKronrod15::kKronrodWeights[k] * h);
        gauss_w_.push_back(half * GaussKronrod15::kGaussWeights[k] * h);
      }
    }
  } else if (noise_.as<EmpiricalNoise>()) {
    Rng rng(opts_.mc_seed);
    mc_b_.resize(opts_.mc_draws);
    for (double& b : mc_b_) b = sample_difference(noise_, rng);
  } else {
    mass_ = difference_mass(noise_);
  }
}

EsjdValue EsjdFunction::evaluate(double ell) const {
  require_positive_ell(ell);
  const double scale = 2.0 * ell * ell;
  if (!mass_.empty()) {
    double acc = 0.0;
    for (const auto& [b, p] : mass_) acc += p * norm_cdf(b / ell - 0.5 * ell);
    return {scale * acc, 0.0};
  }
  if (!mc_b_.empty()) {
    double sum = 0.0, sum_sq = 0.0;
    for (double b : mc_b_) {
      const double v = norm_cdf(b / ell - 0.5 * ell);
      sum += v;
      sum_sq += v * v;
    }
    const double n = static_cast<double>(mc_b_.size());
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    return {scale * mean, scale * std::sqrt(var / n)};
  }
  constexpr std::size_t kN = GaussKronrod15::kNodes;
  double total = 0.0, residual = 0.0;
  for (std::size_t p = 0; p < nodes_.size(); p += kN) {
    double kron = 0.0, gauss = 0.0;
    for (std::size_t k = p; k < p + kN; ++k) {
      const double f = f_bundle(nodes_[k], ell).f;
      kron += kronrod_w_[k] * f;
      gauss += gauss_w_[k] * f;
    }
    total += kron;
    residual += std::abs(kron - gauss);
  }
  total *= 2.0;
  residual *= 2.0;
  if (residual > opts_.abs_tol)
    throw QuadratureError("J(" + std::to_string(ell) + ") for " + noise_.descriptor() + " did not converge",
                          residual);
  return {total, residual};
}

double j_esjd(const NoiseModel& noise, double ell) {
  require_positive_ell(ell);
  if (noise.is_point_mass()) return j_infty(ell);
  return EsjdFunction(noise)(ell);
}

Optimum maximize_scan_golden(const std::function<double(double)>& fn, ScalingRange range,
                             const MaximizeOptions& opts) {
  if (!(range.hi > range.lo) || !(range.lo > 0.0)) throw std::domain_error("invalid scaling range");
  const int n = std::max(3, opts.scan_points);
  const double step = (range.hi - range.lo) / (n - 1);
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double v = fn(range.lo + step * i);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best == 0 || best == n - 1) {
    const double at = range.lo + step * best;
    if (!opts.allow_boundary)
      throw BoundaryOptimumError("optimum at boundary of scaling range; widen the range", at);
    return {at, best_val};
  }
  double a = range.lo + step * (best - 1);
  double b = range.lo + step * (best + 1);
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = fn(x1);
  double f2 = fn(x2);
  while (b - a > opts.tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = fn(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = fn(x1);
    }
  }
  const double mid = 0.5 * (a + b);
  const double fmid = fn(mid);
  if (fmid >= best_val) return {mid, fmid};
  return {range.lo + step * best, best_val};
}

Optimum optimal_scaling(const EsjdFunction& esjd, ScalingRange range) {
  return maximize_scan_golden([&](double ell) { return esjd(ell); }, range);
}

Optimum optimal_scaling(const NoiseModel& noise, ScalingRange range) {
  if (noise.is_point_mass()) return maximize_scan_golden(j_infty, range);
  return optimal_scaling(EsjdFunction(noise), range);
}

double ell_hat_infty() {
  static const double value = [] {
    MaximizeOptions opts;
    opts.tol = 1e-9;
    return maximize_scan_golden(j_infty, ScalingRange{}, opts).ell_hat;
  }();
  return value;
}

EfficiencyCurve efficiency_curve(const NoiseModel& noise, double ell_min, double ell_max, int steps) {
  if (steps < 2) throw std::invalid_argument("efficiency_curve: need at least 2 steps");
  if (!(ell_min > 0.0) || !(ell_max > ell_min)) throw std::domain_error("efficiency_curve: bad range");
  const EsjdFunction esjd(noise);
  EfficiencyCurve curve;
  curve.noise = noise.descriptor();
  for (int i = 0; i < steps; ++i) {
    const double ell = ell_min + (ell_max - ell_min) * i / (steps - 1);
    curve.ells.push_back(ell);
    curve.j_values.push_back(esjd(ell));
  }
  MaximizeOptions opts;
  opts.allow_boundary = true;
  const auto opt = maximize_scan_golden([&](double ell) { return esjd(ell); }, {ell_min, ell_max}, opts);
  curve.ell_hat = opt.ell_hat;
  curve.j_at_ell_hat = opt.j_hat;
  return curve;
}

RatioEnvelope ratio_envelope() {
  const double lhat = ell_hat_infty();
  return {j_infty(kTwoRootTwo) / j_infty(lhat), (kTwoRootTwo / lhat) * (kTwoRootTwo / lhat)};
}

double weak_condition_integral(const NoiseModel& noise, double ell) {
  require_positive_ell(ell);
  if (!noise.is_continuous())
    throw NoDensityError("weak_condition_integral needs a continuous noise model");
  const double b_max = h_support_bound(noise);
  constexpr double kStep = 1e-4;
  auto integrand = [&](double b) {
    const double dh = (h_value(noise, b + kStep) - h_value(noise, std::abs(b - kStep))) / (2.0 * kStep);
    return dh * f_bundle(b, ell).df_db;
  };
  SimpsonOptions opts;
  opts.abs_tol = 1e-8;
  return adaptive_simpson(integrand, 0.0, b_max, {}, opts).value;
}

TheoremCertificate certify_theorem(const NoiseModel& noise, const CertifyOptions& opts) {
  TheoremCertificate cert{};
  cert.noise = noise.descriptor();
  cert.log_concave = noise.log_concavity();

  std::function<double(double)> j;
  std::shared_ptr<EsjdFunction> esjd;
  if (noise.is_point_mass()) {
    j = j_infty;
  } else {
    esjd = std::make_shared<EsjdFunction>(noise);
    j = [esjd](double ell) { return (*esjd)(ell); };
  }

  const auto opt = maximize_scan_golden(j, ScalingRange{});
  cert.ell_hat = opt.ell_hat;
  cert.j_hat = opt.j_hat;

  const double lhat_inf = ell_hat_infty();
  cert.lower_ok = cert.ell_hat >= lhat_inf - opts.tol;
  cert.upper_ok = cert.ell_hat <= kTwoRootTwo + opts.tol;
  cert.upper_asserted = cert.log_concave == LogConcavity::yes;
  if (!cert.lower_ok)
    cert.violation = CertificateViolation{"optimal scaling below the noiseless optimum", cert.ell_hat, lhat_inf,
                                          cert.ell_hat / lhat_inf};
  else if (cert.upper_asserted && !cert.upper_ok)
    cert.violation = CertificateViolation{"optimal scaling above 2 sqrt 2 for log-concave noise", cert.ell_hat,
                                          kTwoRootTwo, cert.ell_hat / kTwoRootTwo};

  const int n = std::max(2, opts.grid_points);
  std::vector<double> ells(n), js(n);
  for (int i = 0; i < n; ++i) {
    ells[i] = lhat_inf + (kTwoRootTwo - lhat_inf) * i / (n - 1);
    js[i] = j(ells[i]);
  }
  const auto [jmin, jmax] = std::minmax_element(js.begin(), js.end());
  cert.ratio_min = *jmin / *jmax;
  cert.ratio_ok = cert.ratio_min > opts.min_ratio;
  if (!cert.ratio_ok && !cert.violation)
    cert.violation = CertificateViolation{"efficiency ratio below threshold",
                                          ells[static_cast<std::size_t>(jmin - js.begin())],
                                          ells[static_cast<std::size_t>(jmax - js.begin())], cert.ratio_min};

  const auto env = ratio_envelope();
  cert.ratio_lo = std::numeric_limits<double>::infinity();
  cert.ratio_hi = -std::numeric_limits<double>::infinity();
  cert.envelope_ok = true;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double r = js[k] / js[i];
      cert.ratio_lo = std::min(cert.ratio_lo, r);
      cert.ratio_hi = std::max(cert.ratio_hi, r);
      if (cert.envelope_ok && (r < env.lower - opts.tol || r > env.upper + opts.tol)) {
        cert.envelope_ok = false;
        if (!cert.violation) cert.violation = CertificateViolation{"ratio outside envelope", ells[i], ells[k], r};
      }
    }
  }

  if (noise.is_continuous()) cert.weak_condition = weak_condition_integral(noise, kTwoRootTwo);
  return cert;
}

std::vector<double> unit_grid(int n) {
  if (n < 1) throw std::invalid_argument("unit_grid: n must be positive");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = static_cast<double>(i + 1) / (n + 1);
  return g;
}

TwoPointScan twopoint_scan(std::span<const double> grid_eps, std::span<const double> grid_pstar,
                           unsigned threads) {
  TwoPointScan scan;
  scan.eps.assign(grid_eps.begin(), grid_eps.end());
  scan.pstar.assign(grid_pstar.begin(), grid_pstar.end());
  for (double v : scan.eps)
    if (!(v > 0.0 && v < 1.0)) throw std::domain_error("twopoint_scan: epsilon grid must lie in (0, 1)");
  for (double v : scan.pstar)
    if (!(v > 0.0 && v < 1.0)) throw std::domain_error("twopoint_scan: p* grid must lie in (0, 1)");
  scan.ell_hat.assign(scan.eps.size() * scan.pstar.size(), 0.0);
  parallel_for(scan.ell_hat.size(), threads, [&](std::size_t idx) {
    const double e = scan.eps[idx / scan.pstar.size()];
    const double p = scan.pstar[idx % scan.pstar.size()];
    scan.ell_hat[idx] = optimal_scaling(NoiseModel::two_point(e, p)).ell_hat;
  });
  return scan;
}

LemmaGrid LemmaGrid::standard() {
  LemmaGrid g;
  g.b.push_back(0.01);
  for (int i = 1; i <= 80; ++i) g.b.push_back(0.25 * i);
  for (int i = 1; i <= 30; ++i) g.ell.push_back(0.2 * i);
  return g;
}

bool LemmaReport::passed(double fd_tol) const {
  return points > 0 && min_lower_margin > 0.0 && std::isfinite(min_log_upper_margin) &&
         max_identity_error <= 1e-10 && max_limit_df_db <= 1e-8 && max_df_db <= 1e-12 &&
         max_fd_error_dl < fd_tol && max_fd_error_db < fd_tol && max_fd_error_dbb < fd_tol;
}

namespace {

// Central difference with one Richardson step.
template <class F>
double richardson_first(F&& fn, double x, double h) {
  const double d1 = (fn(x + h) - fn(x - h)) / (2.0 * h);
  const double h2 = 0.5 * h;
  const double d2 = (fn(x + h2) - fn(x - h2)) / (2.0 * h2);
  return (4.0 * d2 - d1) / 3.0;
}

template <class F>
double richardson_second(F&& fn, double x, double h) {
  const double f0 = fn(x);
  const double d1 = (fn(x + h) - 2.0 * f0 + fn(x - h)) / (h * h);
  const double h2 = 0.5 * h;
  const double d2 = (fn(x + h2) - 2.0 * f0 + fn(x - h2)) / (h2 * h2);
  return (4.0 * d2 - d1) / 3.0;
}

// Relative error, with the denominator floored at 1e-3 of the derivative's
// natural magnitude so that sign changes do not divide by ~0.
double rel_err(double fd, double analytic, double natural) {
  return std::abs(fd - analytic) / std::max(std::abs(analytic), 1e-3 * std::abs(natural));
}

}  // namespace

LemmaReport verify_lemma(const LemmaGrid& grid) {
  LemmaReport r{};
  r.min_lower_margin = std::numeric_limits<double>::infinity();
  r.min_log_upper_margin = std::numeric_limits<double>::infinity();
  r.max_df_db = -std::numeric_limits<double>::infinity();
  constexpr double kStepFirst = 1e-5;
  constexpr double kStepSecond = 1e-3;

  for (double ell : grid.ell) {
    const auto lower = dlog_j_infty(ell).first;
    auto f_of_b = [ell](double b) { return f_bundle(std::abs(b), ell).f; };

    for (double b : grid.b) {
      const auto fb = f_bundle(b, ell);
      ++r.points;

      r.min_lower_margin = std::min(r.min_lower_margin, fb.df_dl / fb.f - lower);
      r.min_log_upper_margin =
          std::min(r.min_log_upper_margin, 2.0 * std::log(ell) + fb.log_kernel - fb.log_f);

      const double rhs_a = ell * fb.d2f_db2;
      const double rhs_b = (2.0 / ell - 0.25 * ell) * fb.f;
      const double scale = std::abs(fb.df_dl) + std::abs(rhs_a) + std::abs(rhs_b);
      r.max_identity_error = std::max(r.max_identity_error, std::abs(fb.df_dl - rhs_a - rhs_b) / scale);

      r.max_df_db = std::max(r.max_df_db, fb.df_db);

      auto f_of_l = [b](double l) { return f_bundle(b, l).f; };
      r.max_fd_error_dl = std::max(
          r.max_fd_error_dl, rel_err(richardson_first(f_of_l, ell, kStepFirst * ell), fb.df_dl, fb.f / ell));
      r.max_fd_error_db =
          std::max(r.max_fd_error_db, rel_err(richardson_first(f_of_b, b, kStepFirst), fb.df_db, fb.f));
      r.max_fd_error_dbb =
          std::max(r.max_fd_error_dbb, rel_err(richardson_second(f_of_b, b, kStepSecond), fb.d2f_db2, fb.f));
    }

    for (double b : {1e-9, 60.0 + 10.0 * ell})
      r.max_limit_df_db = std::max(r.max_limit_df_db, std::abs(f_bundle(b, ell).df_db));
  }
  return r;
}

}  // namespace psmrwm

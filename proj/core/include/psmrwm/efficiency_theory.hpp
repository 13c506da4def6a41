#pragma once

// Limiting expected squared jumping distance of the pseudo-marginal RWM,
//
//   J(l) = 2 l^2 E[Phi(B/l - l/2)],        B = W* - W,
//
// its noiseless special case J_inf(l) = 2 l^2 Phi(-l/2), the kernel
//
//   f(b, l) = l^2 [exp(-b/2) Phi(b/l - l/2) + exp(b/2) Phi(-b/l - l/2)]
//
// through which J(l) = 2 int_0^inf h(b) f(b, l) db, and numerical checks of the
// bounds these functions satisfy.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psmrwm/noise_models.hpp"

namespace psmrwm {

inline constexpr double kTwoRootTwo = 2.8284271247461900976;

double j_infty(double ell);

struct LogJDerivatives {
  double first;
  double second;
};

/// First and second derivatives of log J_inf with respect to ell.
LogJDerivatives dlog_j_infty(double ell);

struct FBundle {
  double f;
  double df_dl;
  double df_db;
  double d2f_db2;
  double log_f;
  // log of phi(l/2) exp(-b^2 / (2 l^2)), the factor shared by the derivatives.
  double log_kernel;
};

/// f(b, l) and its partial derivatives. Requires b >= 0, ell > 0. The
/// exp(b/2) Phi(-b/l - l/2) term is formed in log space, so large b is safe.
FBundle f_bundle(double b, double ell);

/// Two-point noise, closed form.
double j_twopoint(double epsilon, double p_star, double ell);

/// Gaussian noise: B ~ N(-sigma^2, 2 sigma^2) gives
/// E[Phi(B/l - l/2)] = Phi((-sigma^2/l - l/2) / sqrt(1 + 2 sigma^2 / l^2)).
double j_gaussian_closed_form(double sigma, double ell);

struct EsjdOptions {
  double abs_tol = 1e-9;           // quadrature acceptance threshold
  std::size_t mc_draws = 200000;   // empirical noise only
  std::uint64_t mc_seed = 0x5eed2016ULL;
};

struct EsjdValue {
  double value;
  double error;  // quadrature residual estimate, or Monte Carlo standard error
};

/// J(l) for one noise model, with per-model setup done once.
///
/// Continuous noise: h(b) is tabulated at Gauss-Kronrod nodes on [0, b_max]
/// and J(l) = 2 int h f db is a weighted sum over the table. Two-point and
/// point-mass noise: exact sum over the mass function of B. Empirical noise:
/// a fixed set of B draws (common random numbers across l).
class EsjdFunction {
 public:
  explicit EsjdFunction(NoiseModel noise, EsjdOptions opts = {});

  double operator()(double ell) const { return evaluate(ell).value; }
  EsjdValue evaluate(double ell) const;

  const NoiseModel& noise() const { return noise_; }
  /// Number of h evaluations held in the table (0 for non-continuous noise).
  std::size_t table_size() const { return nodes_.size(); }
  double b_max() const { return b_max_; }

 private:
  NoiseModel noise_;
  EsjdOptions opts_;
  double b_max_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> kronrod_w_;  // weight * h(node)
  std::vector<double> gauss_w_;
  std::vector<MassPoint> mass_;
  std::vector<double> mc_b_;
};

/// Single-shot J(l). Prefer EsjdFunction when evaluating many scalings.
double j_esjd(const NoiseModel& noise, double ell);

struct ScalingRange {
  double lo = 0.05;
  double hi = 10.0;
};

struct Optimum {
  double ell_hat;
  double j_hat;
};

struct MaximizeOptions {
  int scan_points = 200;
  double tol = 1e-4;
  bool allow_boundary = false;
};

/// Scan `scan_points` equally spaced values, then golden-section search in the
/// two cells around the best one until the bracket is narrower than `tol`.
/// Throws BoundaryOptimumError when the scan's best point is an endpoint,
/// unless allowed.
Optimum maximize_scan_golden(const std::function<double(double)>& fn, ScalingRange range,
                             const MaximizeOptions& opts = {});

Optimum optimal_scaling(const NoiseModel& noise, ScalingRange range = {});
Optimum optimal_scaling(const EsjdFunction& esjd, ScalingRange range = {});

/// Optimal scaling of J_inf, computed once on first use (~2.3812).
double ell_hat_infty();

struct EfficiencyCurve {
  std::string noise;
  std::vector<double> ells;
  std::vector<double> j_values;
  double ell_hat;
  double j_at_ell_hat;
};

EfficiencyCurve efficiency_curve(const NoiseModel& noise, double ell_min, double ell_max, int steps);

/// Sharp ratio envelope over [ell_hat_inf, 2 sqrt 2]: for l1 < l2 in that
/// interval, lower * J(l1) < J(l2) < upper * J(l1) (0.949 and 1.411 to 3dp).
struct RatioEnvelope {
  double lower;
  double upper;
};
RatioEnvelope ratio_envelope();

struct CertificateViolation {
  std::string what;
  double ell1;
  double ell2;
  double ratio;
};

struct TheoremCertificate {
  std::string noise;
  LogConcavity log_concave;
  double ell_hat;
  double j_hat;
  bool lower_ok;         // ell_hat >= ell_hat_inf - tol
  bool upper_ok;         // ell_hat <= 2 sqrt 2 + tol
  bool upper_asserted;   // only for log-concave noise
  double ratio_min;      // min J(l1)/J(l2) over the interval
  double ratio_lo;       // min J(l2)/J(l1) over l1 < l2
  double ratio_hi;       // max J(l2)/J(l1) over l1 < l2
  bool ratio_ok;         // ratio_min > 0.70
  bool envelope_ok;      // ratio_lo, ratio_hi inside the envelope +- tol
  std::optional<double> weak_condition;  // int h' f' db at l = 2 sqrt 2
  std::optional<CertificateViolation> violation;

  bool passed() const {
    return lower_ok && (!upper_asserted || upper_ok) && ratio_ok && envelope_ok;
  }
};

struct CertifyOptions {
  int grid_points = 100;
  double tol = 1e-3;
  double min_ratio = 0.70;
};

TheoremCertificate certify_theorem(const NoiseModel& noise, const CertifyOptions& opts = {});

/// int_0^inf (dh/db)(df/db) db at the given scaling; a positive value is
/// sufficient for J to be decreasing there. Continuous noise only.
double weak_condition_integral(const NoiseModel& noise, double ell);

struct TwoPointScan {
  std::vector<double> eps;
  std::vector<double> pstar;
  std::vector<double> ell_hat;  // row-major, eps outer

  double at(std::size_t i_eps, std::size_t i_pstar) const {
    return ell_hat[i_eps * pstar.size() + i_pstar];
  }
};

TwoPointScan twopoint_scan(std::span<const double> grid_eps, std::span<const double> grid_pstar,
                           unsigned threads = 1);

/// {step, 2 step, ..., 1 - step} for step = 1/(n + 1).
std::vector<double> unit_grid(int n);

// Numerical check of the four properties of f used in the insensitivity
// argument, on a b x l grid.
struct LemmaReport {
  std::size_t points = 0;
  double min_lower_margin;      // (1/f) df/dl - [2/l - phi(l/2) / (2 Phi(-l/2))]
  double min_log_upper_margin;  // log(2/l - (1/f) df/dl); finite means strictly positive
  double max_identity_error;    // |df/dl - l f_bb - (2/l - l/4) f|, relative
  double max_limit_df_db;       // |df/db| at b -> 0 and b -> inf probes
  double max_df_db;             // sup of df/db over the grid (should be <= 0)
  double max_fd_error_dl;
  double max_fd_error_db;
  double max_fd_error_dbb;

  bool passed(double fd_tol) const;
};

struct LemmaGrid {
  std::vector<double> b;
  std::vector<double> ell;
  static LemmaGrid standard();  // b in {0.01, 0.25, ..., 20}, l in {0.2, 0.4, ..., 6}
};

LemmaReport verify_lemma(const LemmaGrid& grid = LemmaGrid::standard());

}  // namespace psmrwm

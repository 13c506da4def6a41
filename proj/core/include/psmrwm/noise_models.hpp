#pragma once

// Distributions for the additive noise W* in a log-target estimate.
//
// Every model obeys the unbiasedness convention E[exp(W*)] = 1. The chain's
// stationary noise at the current point, W, then has density exp(w) g(w), and
// the quantity driving acceptance is B = W* - W.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "psmrwm/random.hpp"

namespace psmrwm {

enum class LogConcavity { yes, no, unknown };

struct NoNoise {};

struct GaussianNoise {
  double sigma;  // standard deviation of W*; location is -sigma^2/2
};

struct LaplaceNoise {
  double scale;  // in (0, 1); location is log(1 - scale^2)
};

// exp(W*) = epsilon with probability p_star, a = (1 - p_star*epsilon)/(1 - p_star) otherwise.
struct TwoPointNoise {
  double epsilon;
  double p_star;

  double a() const { return (1.0 - p_star * epsilon) / (1.0 - p_star); }
  double k() const;  // log a - log epsilon
  double stationary_p() const { return p_star * epsilon; }
};

struct EmpiricalNoise {
  std::shared_ptr<const std::vector<double>> samples;
  // Cumulative self-normalised weights exp(w_i) / sum_j exp(w_j).
  std::shared_ptr<const std::vector<double>> stationary_cdf;
};

struct CustomNoise {
  std::function<double(double)> log_density;
  double lo;
  double hi;
  LogConcavity log_concave = LogConcavity::unknown;
  std::vector<double> kinks;
  // Trapezoid CDFs of g and exp(w) g(w) on a uniform grid over [lo, hi],
  // filled at construction and used for inverse-CDF sampling.
  std::shared_ptr<const std::vector<double>> cdf_proposal;
  std::shared_ptr<const std::vector<double>> cdf_stationary;
};

struct Interval {
  double lo;
  double hi;
};

class NoiseModel {
 public:
  using Variant =
      std::variant<NoNoise, GaussianNoise, LaplaceNoise, TwoPointNoise, EmpiricalNoise, CustomNoise>;

  static NoiseModel none();
  /// sigma == 0 yields the point mass at zero.
  static NoiseModel gaussian(double sigma);
  static NoiseModel laplace(double scale);
  static NoiseModel two_point(double epsilon, double p_star);
  static NoiseModel empirical(std::vector<double> w_star);
  /// `log_g` must integrate to one, and exp(w) g(w) must integrate to one,
  /// over [lo, hi]; both are checked by quadrature at construction.
  static NoiseModel custom(std::function<double(double)> log_g, double lo, double hi,
                           LogConcavity log_concave = LogConcavity::unknown,
                           std::vector<double> kinks = {});

  const Variant& variant() const { return v_; }

  template <class T>
  const T* as() const {
    return std::get_if<T>(&v_);
  }

  /// True for variants with a Lebesgue density (Gaussian, Laplace, custom).
  bool is_continuous() const;
  bool is_point_mass() const { return std::holds_alternative<NoNoise>(v_); }
  LogConcavity log_concavity() const;
  std::string descriptor() const;

  /// Interval outside which both g and exp(w) g(w) are below ~1e-14 of their peaks.
  Interval support() const;
  /// Points where log g is not differentiable.
  std::vector<double> kinks() const;
  /// sup_w g(w), for continuous variants.
  double density_sup() const;

 private:
  explicit NoiseModel(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

/// log g(w) for W*. Throws NoDensityError for discrete variants; returns -inf
/// outside the support.
double log_g(const NoiseModel& model, double w);

/// One draw of W* (stationary = false) or of W ~ exp(w) g(w) (stationary = true).
double sample_noise(const NoiseModel& model, Rng& rng, bool stationary);

/// One draw of B = W* - W.
double sample_difference(const NoiseModel& model, Rng& rng);

/// Density of B at b. Throws NoDensityError for discrete variants.
double rho(const NoiseModel& model, double b);

/// h(b) = exp(b/2) rho(b), evaluated through the symmetric integral
/// int g(w + b/2) g(w - b/2) exp(w) dw. h(b) == h(-b) exactly.
double h_value(const NoiseModel& model, double b);

struct MassPoint {
  double b;
  double prob;
};

/// Mass function of B for the point-mass and two-point variants.
std::vector<MassPoint> difference_mass(const NoiseModel& model);

struct DifferenceMoments {
  double mean;
  double variance;
};

/// Closed-form mean and variance of B where available (Gaussian: -sigma^2, 2 sigma^2).
std::optional<DifferenceMoments> difference_moments(const NoiseModel& model);

/// E[exp(W*)]: quadrature for continuous variants, exact sum for two-point,
/// sample mean for empirical.
double unbiasedness_integral(const NoiseModel& model);

/// Reads a one-column CSV with header `w_star`.
std::vector<double> read_w_star_csv(const std::filesystem::path& path);

}  // namespace psmrwm

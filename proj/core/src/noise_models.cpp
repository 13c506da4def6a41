#include "psmrwm/noise_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "psmrwm/errors.hpp"
#include "psmrwm/normal.hpp"
#include "psmrwm/quadrature.hpp"

namespace psmrwm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Gaussian tails are cut where the density falls to exp(-8.5^2/2) ~ 2e-16 of its peak.
constexpr double kGaussianTailSd = 8.5;
// Exponential tails are cut at exp(-37) ~ 1e-16 of the peak.
constexpr double kExpTailRate = 37.0;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt_num(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

double gaussian_location(double sigma) { return -0.5 * sigma * sigma; }
double laplace_location(double scale) { return std::log1p(-scale * scale); }

[[noreturn]] void no_density(const NoiseModel& m) {
  throw NoDensityError("noise model " + m.descriptor() + " has no density; use the mass function");
}

constexpr int kCustomGrid = 4096;

std::shared_ptr<const std::vector<double>> trapezoid_cdf(const std::function<double(double)>& dens,
                                                         double lo, double hi) {
  const double step = (hi - lo) / kCustomGrid;
  std::vector<double> cum(kCustomGrid + 1, 0.0);
  double prev = dens(lo);
  for (int i = 1; i <= kCustomGrid; ++i) {
    const double cur = dens(lo + step * i);
    cum[i] = cum[i - 1] + 0.5 * step * (prev + cur);
    prev = cur;
  }
  return std::make_shared<const std::vector<double>>(std::move(cum));
}

}  // namespace

static double log_g_unchecked(const NoiseModel& model, double w);

double TwoPointNoise::k() const { return std::log(a()) - std::log(epsilon); }

NoiseModel NoiseModel::none() { return NoiseModel(NoNoise{}); }

NoiseModel NoiseModel::gaussian(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::invalid_argument("gaussian noise: sigma must be finite and >= 0");
  if (sigma == 0.0) return none();
  return NoiseModel(GaussianNoise{sigma});
}

NoiseModel NoiseModel::laplace(double scale) {
  if (!(scale > 0.0 && scale < 1.0))
    throw std::invalid_argument("laplace noise: scale must lie in (0, 1), otherwise E[exp(W)] diverges");
  return NoiseModel(LaplaceNoise{scale});
}

NoiseModel NoiseModel::two_point(double epsilon, double p_star) {
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(p_star > 0.0 && p_star < 1.0))
    throw std::invalid_argument("two-point noise: epsilon and p_star must lie in (0, 1)");
  return NoiseModel(TwoPointNoise{epsilon, p_star});
}

NoiseModel NoiseModel::empirical(std::vector<double> w_star) {
  if (w_star.empty()) throw std::invalid_argument("empirical noise: no samples");
  for (double w : w_star)
    if (!std::isfinite(w)) throw std::invalid_argument("empirical noise: non-finite sample");
  const double w_max = *std::max_element(w_star.begin(), w_star.end());
  std::vector<double> cdf(w_star.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w_star.size(); ++i) {
    acc += std::exp(w_star[i] - w_max);
    cdf[i] = acc;
  }
  for (double& c : cdf) c /= acc;
  cdf.back() = 1.0;
  return NoiseModel(EmpiricalNoise{std::make_shared<const std::vector<double>>(std::move(w_star)),
                                   std::make_shared<const std::vector<double>>(std::move(cdf))});
}

NoiseModel NoiseModel::custom(std::function<double(double)> log_g, double lo, double hi,
                              LogConcavity log_concave, std::vector<double> kinks) {
  if (!log_g) throw std::invalid_argument("custom noise: empty log-density");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("custom noise: support must be a finite non-empty interval");
  auto cdf_g = trapezoid_cdf([&](double w) { return std::exp(log_g(w)); }, lo, hi);
  auto cdf_t = trapezoid_cdf([&](double w) { return std::exp(log_g(w) + w); }, lo, hi);
  NoiseModel m(CustomNoise{std::move(log_g), lo, hi, log_concave, std::move(kinks), std::move(cdf_g),
                           std::move(cdf_t)});
  const auto ks = m.kinks();
  const double mass =
      adaptive_simpson([&](double w) { return std::exp(log_g_unchecked(m, w)); }, lo, hi, ks).value;
  const double tilt = unbiasedness_integral(m);
  if (std::abs(mass - 1.0) > 1e-8)
    throw std::invalid_argument("custom noise: density integrates to " + fmt_num(mass));
  if (std::abs(tilt - 1.0) > 1e-8)
    throw std::invalid_argument("custom noise: E[exp(W)] = " + fmt_num(tilt) + ", expected 1");
  return m;
}

bool NoiseModel::is_continuous() const {
  return std::holds_alternative<GaussianNoise>(v_) || std::holds_alternative<LaplaceNoise>(v_) ||
         std::holds_alternative<CustomNoise>(v_);
}

LogConcavity NoiseModel::log_concavity() const {
  return std::visit(Overloaded{
                        [](const NoNoise&) { return LogConcavity::yes; },
                        [](const GaussianNoise&) { return LogConcavity::yes; },
                        [](const LaplaceNoise&) { return LogConcavity::yes; },
                        [](const TwoPointNoise&) { return LogConcavity::no; },
                        [](const EmpiricalNoise&) { return LogConcavity::unknown; },
                        [](const CustomNoise& c) { return c.log_concave; },
                    },
                    v_);
}

std::string NoiseModel::descriptor() const {
  return std::visit(
      Overloaded{
          [](const NoNoise&) { return std::string("none"); },
          [](const GaussianNoise& g) { return "gaussian(sigma=" + fmt_num(g.sigma) + ")"; },
          [](const LaplaceNoise& l) { return "laplace(scale=" + fmt_num(l.scale) + ")"; },
          [](const TwoPointNoise& t) {
            return "twopoint(eps=" + fmt_num(t.epsilon) + ";pstar=" + fmt_num(t.p_star) + ")";
          },
          [](const EmpiricalNoise& e) { return "empirical(n=" + std::to_string(e.samples->size()) + ")"; },
          [](const CustomNoise&) { return std::string("custom"); },
      },
      v_);
}

Interval NoiseModel::support() const {
  return std::visit(
      Overloaded{
          [](const GaussianNoise& g) {
            const double mu = gaussian_location(g.sigma);
            return Interval{mu - kGaussianTailSd * g.sigma,
                            mu + g.sigma * g.sigma + kGaussianTailSd * g.sigma};
          },
          [](const LaplaceNoise& l) {
            const double mu = laplace_location(l.scale);
            return Interval{mu - kExpTailRate * l.scale, mu + kExpTailRate / (1.0 / l.scale - 1.0)};
          },
          [](const CustomNoise& c) { return Interval{c.lo, c.hi}; },
          [this](const auto&) -> Interval { no_density(*this); },
      },
      v_);
}

std::vector<double> NoiseModel::kinks() const {
  if (const auto* l = as<LaplaceNoise>()) return {laplace_location(l->scale)};
  if (const auto* c = as<CustomNoise>()) return c->kinks;
  return {};
}

double NoiseModel::density_sup() const {
  return std::visit(
      Overloaded{
          [](const GaussianNoise& g) { return 1.0 / (g.sigma * std::sqrt(2.0 * M_PI)); },
          [](const LaplaceNoise& l) { return 0.5 / l.scale; },
          [](const CustomNoise& c) {
            // Dense scan; adequate for the smooth densities this variant is meant for.
            constexpr int kScan = 20000;
            double best = kNegInf;
            for (int i = 0; i <= kScan; ++i)
              best = std::max(best, c.log_density(c.lo + (c.hi - c.lo) * i / kScan));
            return std::exp(best);
          },
          [this](const auto&) -> double { no_density(*this); },
      },
      v_);
}

// Unchecked evaluation used by the quadrature routines; callers guarantee a
// continuous variant.
double log_g_unchecked(const NoiseModel& model, double w) {
  if (const auto* g = model.as<GaussianNoise>()) {
    const double z = (w - gaussian_location(g->sigma)) / g->sigma;
    return norm_log_pdf(z) - std::log(g->sigma);
  }
  if (const auto* l = model.as<LaplaceNoise>()) {
    return -std::log(2.0 * l->scale) - std::abs(w - laplace_location(l->scale)) / l->scale;
  }
  const auto& c = *model.as<CustomNoise>();
  if (w < c.lo || w > c.hi) return kNegInf;
  return c.log_density(w);
}

double log_g(const NoiseModel& model, double w) {
  if (!model.is_continuous()) no_density(model);
  const Interval sup = model.support();
  if (w < sup.lo || w > sup.hi) return -std::numeric_limits<double>::infinity();
  return log_g_unchecked(model, w);
}

double sample_noise(const NoiseModel& model, Rng& rng, bool stationary) {
  return std::visit(
      Overloaded{
          [](const NoNoise&) { return 0.0; },
          [&](const GaussianNoise& g) {
            const double mean = stationary ? 0.5 * g.sigma * g.sigma : gaussian_location(g.sigma);
            return std::normal_distribution<double>(mean, g.sigma)(rng);
          },
          [&](const LaplaceNoise& l) {
            const double mu = laplace_location(l.scale);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            // Both g and its exponential tilt are two-sided exponentials around mu.
            const double right_mass = stationary ? 0.5 * (1.0 + l.scale) : 0.5;
            const double right_rate = stationary ? 1.0 / l.scale - 1.0 : 1.0 / l.scale;
            const double left_rate = stationary ? 1.0 / l.scale + 1.0 : 1.0 / l.scale;
            if (unif(rng) < right_mass)
              return mu + std::exponential_distribution<double>(right_rate)(rng);
            return mu - std::exponential_distribution<double>(left_rate)(rng);
          },
          [&](const TwoPointNoise& t) {
            const double p_low = stationary ? t.stationary_p() : t.p_star;
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            return unif(rng) < p_low ? std::log(t.epsilon) : std::log(t.a());
          },
          [&](const EmpiricalNoise& e) {
            const auto& s = *e.samples;
            if (!stationary) {
              std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
              return s[pick(rng)];
            }
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const auto& cdf = *e.stationary_cdf;
            auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            if (it == cdf.end()) --it;
            return s[static_cast<std::size_t>(it - cdf.begin())];
          },
          [&](const CustomNoise& c) {
            const auto& cum = stationary ? *c.cdf_stationary : *c.cdf_proposal;
            const double step = (c.hi - c.lo) / kCustomGrid;
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * cum.back();
            auto it = std::lower_bound(cum.begin(), cum.end(), u);
            const auto i = std::clamp<std::ptrdiff_t>(it - cum.begin(), 1, kCustomGrid);
            const double frac = (u - cum[i - 1]) / std::max(cum[i] - cum[i - 1], 1e-300);
            return c.lo + step * (static_cast<double>(i - 1) + frac);
          },
      },
      model.variant());
}

double sample_difference(const NoiseModel& model, Rng& rng) {
  const double w_star = sample_noise(model, rng, false);
  const double w = sample_noise(model, rng, true);
  return w_star - w;
}

double rho(const NoiseModel& model, double b) {
  if (!model.is_continuous()) no_density(model);
  const auto [lo, hi] = model.support();
  const double a = std::max(lo, lo - b);
  const double c = std::min(hi, hi - b);
  if (!(c > a)) return 0.0;
  std::vector<double> bps;
  for (double k : model.kinks()) {
    bps.push_back(k);
    bps.push_back(k - b);
  }
  auto integrand = [&](double w) {
    return std::exp(log_g_unchecked(model, w) + w + log_g_unchecked(model, w + b));
  };
  return adaptive_simpson(integrand, a, c, bps).value;
}

double h_value(const NoiseModel& model, double b) {
  if (!model.is_continuous()) no_density(model);
  const double half = 0.5 * std::abs(b);
  const auto [lo, hi] = model.support();
  const double a = lo + half;
  const double c = hi - half;
  if (!(c > a)) return 0.0;
  std::vector<double> bps;
  for (double k : model.kinks()) {
    bps.push_back(k - half);
    bps.push_back(k + half);
  }
  auto integrand = [&](double w) {
    return std::exp(log_g_unchecked(model, w + half) + log_g_unchecked(model, w - half) + w);
  };
  return adaptive_simpson(integrand, a, c, bps).value;
}

std::vector<MassPoint> difference_mass(const NoiseModel& model) {
  if (model.is_point_mass()) return {{0.0, 1.0}};
  if (const auto* t = model.as<TwoPointNoise>()) {
    const double p = t->stationary_p();
    const double ps = t->p_star;
    const double k = t->k();
    return {{-k, ps * (1.0 - p)}, {0.0, ps * p + (1.0 - ps) * (1.0 - p)}, {k, (1.0 - ps) * p}};
  }
  throw std::invalid_argument("difference_mass: " + model.descriptor() +
                              " has no finite mass function for B");
}

std::optional<DifferenceMoments> difference_moments(const NoiseModel& model) {
  if (model.is_point_mass()) return DifferenceMoments{0.0, 0.0};
  if (const auto* g = model.as<GaussianNoise>()) {
    const double s2 = g->sigma * g->sigma;
    return DifferenceMoments{-s2, 2.0 * s2};
  }
  if (model.as<TwoPointNoise>()) {
    double mean = 0.0, second = 0.0;
    for (const auto& [b, p] : difference_mass(model)) {
      mean += p * b;
      second += p * b * b;
    }
    return DifferenceMoments{mean, second - mean * mean};
  }
  return std::nullopt;
}

double unbiasedness_integral(const NoiseModel& model) {
  if (model.is_point_mass()) return 1.0;
  if (const auto* t = model.as<TwoPointNoise>()) return t->p_star * t->epsilon + t->a() * (1.0 - t->p_star);
  if (const auto* e = model.as<EmpiricalNoise>()) {
    double acc = 0.0;
    for (double w : *e->samples) acc += std::exp(w);
    return acc / static_cast<double>(e->samples->size());
  }
  const auto [lo, hi] = model.support();
  const auto ks = model.kinks();
  return adaptive_simpson([&](double w) { return std::exp(log_g_unchecked(model, w) + w); }, lo, hi, ks)
      .value;
}

std::vector<double> read_w_star_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "w_star") throw std::runtime_error(path.string() + ": expected header `w_star`");
  std::vector<double> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(line, &used));
      if (used != line.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad value `" + line + "`");
    }
  }
  return out;
}

}  // namespace psmrwm

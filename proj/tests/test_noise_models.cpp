#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "psmrwm/errors.hpp"
#include "psmrwm/noise_models.hpp"
#include "psmrwm/normal.hpp"

using namespace psmrwm;
using doctest::Approx;

namespace {

double laplace_pdf(double w, double s) {
  const double mu = std::log(1 - s * s);
  return std::exp(-std::abs(w - mu) / s) / (2 * s);
}

// rho(b) = int g(w + b) e^w g(w) dw by a plain fine trapezoid rule.
double laplace_rho_trapezoid(double b, double s) {
  const double lo = -40 * s - 5, hi = 40 * s + 5;
  const int n = 400000;
  const double dx = (hi - lo) / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double w = lo + i * dx;
    const double v = laplace_pdf(w + b, s) * std::exp(w) * laplace_pdf(w, s);
    acc += (i == 0 || i == n) ? v / 2 : v;
  }
  return acc * dx;
}

}  // namespace

TEST_CASE("construction and validation") {
  CHECK(NoiseModel::gaussian(0.0).is_point_mass());
  CHECK_THROWS_AS(NoiseModel::gaussian(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel::laplace(1.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel::laplace(0.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel::two_point(1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel::two_point(0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel::empirical({}), std::invalid_argument);
  // a density without the unbiasedness normalisation is rejected
  CHECK_THROWS_AS(NoiseModel::custom([](double w) { return norm_log_pdf(w); }, -12, 12), std::invalid_argument);
}

TEST_CASE("log-concavity flags") {
  CHECK(NoiseModel::none().log_concavity() == LogConcavity::yes);
  CHECK(NoiseModel::gaussian(1).log_concavity() == LogConcavity::yes);
  CHECK(NoiseModel::laplace(0.4).log_concavity() == LogConcavity::yes);
  CHECK(NoiseModel::two_point(0.3, 0.3).log_concavity() != LogConcavity::yes);
  CHECK(NoiseModel::empirical({-0.1, 0.0, 0.05}).log_concavity() != LogConcavity::yes);
}

TEST_CASE("log_g") {
  CHECK(log_g(NoiseModel::gaussian(1), -0.5) == Approx(-0.9189385).epsilon(1e-7));
  CHECK(log_g(NoiseModel::laplace(0.5), std::log(0.75)) == Approx(0.0).epsilon(1e-14));
  CHECK_THROWS_AS(log_g(NoiseModel::two_point(0.5, 0.5), 0.0), NoDensityError);
  CHECK_THROWS_AS(log_g(NoiseModel::none(), 0.0), NoDensityError);
  CHECK(log_g(NoiseModel::gaussian(1), 1e3) == -INFINITY);
}

TEST_CASE("unbiasedness") {
  for (const auto& m : {NoiseModel::gaussian(0.3), NoiseModel::gaussian(1), NoiseModel::gaussian(3),
                        NoiseModel::laplace(0.1), NoiseModel::laplace(0.5), NoiseModel::laplace(0.9)}) {
    INFO(m.descriptor());
    CHECK(std::abs(unbiasedness_integral(m) - 1) < 1e-8);
  }
  for (double eps : {0.05, 0.5, 0.95})
    for (double p : {0.05, 0.5, 0.95}) {
      const TwoPointNoise t{eps, p};
      CHECK(eps * p + t.a() * (1 - p) == Approx(1.0).epsilon(1e-15));
      CHECK(t.k() > 0);
      CHECK(t.stationary_p() == Approx(p * eps));
    }
}

TEST_CASE("sampling") {
  Rng rng(11);
  SUBCASE("no noise") {
    for (int i = 0; i < 10; ++i) {
      CHECK(sample_noise(NoiseModel::none(), rng, false) == 0.0);
      CHECK(sample_noise(NoiseModel::none(), rng, true) == 0.0);
    }
  }
  SUBCASE("gaussian proposal draws are unbiased on the exp scale") {
    const auto g = NoiseModel::gaussian(0.5);
    double acc = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) acc += std::exp(sample_noise(g, rng, false));
    CHECK(acc / n == Approx(1.0).epsilon(3e-3));
  }
  SUBCASE("gaussian stationary mean") {
    const auto g = NoiseModel::gaussian(2);
    double acc = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) acc += sample_noise(g, rng, true);
    CHECK(std::abs(acc / n - 2.0) < 0.01);
  }
  SUBCASE("gaussian stationary distribution, Kolmogorov-Smirnov") {
    const double s = 1.3;
    const auto g = NoiseModel::gaussian(s);
    std::vector<double> xs(1000000);
    for (double& x : xs) x = sample_noise(g, rng, true);
    std::sort(xs.begin(), xs.end());
    double ks = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double f = norm_cdf((xs[i] - s * s / 2) / s);
      ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    CHECK(ks < 0.002);
  }
  SUBCASE("laplace stationary mean matches the moment generating function") {
    const double s = 0.4;
    const double expected = std::log(1 - s * s) + 2 * s * s / (1 - s * s);
    double acc = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) acc += sample_noise(NoiseModel::laplace(s), rng, true);
    CHECK(std::abs(acc / n - expected) < 0.004);
  }
  SUBCASE("two-point stationary mass") {
    const auto t = NoiseModel::two_point(0.5, 0.5);
    int low = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) low += sample_noise(t, rng, true) == std::log(0.5) ? 1 : 0;
    CHECK(std::abs(static_cast<double>(low) / n - 0.25) < 0.005);
  }
  SUBCASE("empirical stationary resampling uses weights exp(w)") {
    const auto e = NoiseModel::empirical({std::log(0.5), std::log(1.5)});
    int high = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) high += sample_noise(e, rng, true) == std::log(1.5) ? 1 : 0;
    CHECK(std::abs(static_cast<double>(high) / n - 0.75) < 0.006);
  }
  SUBCASE("differences have the closed-form moments") {
    const auto g = NoiseModel::gaussian(1.2);
    const auto mom = difference_moments(g);
    REQUIRE(mom);
    CHECK(mom->mean == Approx(-1.44));
    CHECK(mom->variance == Approx(2 * 1.44));
    double s1 = 0, s2 = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
      const double b = sample_difference(g, rng);
      s1 += b;
      s2 += b * b;
    }
    const double mean = s1 / n;
    CHECK(std::abs(mean + 1.44) < 0.015);
    CHECK(std::abs(s2 / n - mean * mean - 2.88) < 0.04);
  }
}

TEST_CASE("rho and h") {
  const auto g1 = NoiseModel::gaussian(1);
  CHECK(rho(g1, -1) == Approx(1 / std::sqrt(4 * std::numbers::pi)).epsilon(1e-9));
  CHECK(h_value(g1, 0) == Approx(std::exp(-0.25) / std::sqrt(4 * std::numbers::pi)).epsilon(1e-9));
  CHECK(h_value(g1, 10) <= g1.density_sup() * std::exp(-5.0));
  CHECK_THROWS_AS(rho(NoiseModel::none(), 0.0), NoDensityError);
  CHECK_THROWS_AS(h_value(NoiseModel::two_point(0.2, 0.2), 0.0), NoDensityError);

  SUBCASE("laplace rho matches a brute-force convolution") {
    for (double b : {-2.0, -0.7, 0.0, 0.3, 0.7, 2.5}) {
      INFO(b);
      CHECK(rho(NoiseModel::laplace(0.3), b) == Approx(laplace_rho_trapezoid(b, 0.3)).epsilon(1e-6));
    }
  }
  SUBCASE("symmetry of h") {
    const auto lap = NoiseModel::laplace(0.3);
    CHECK(std::abs(std::exp(0.35) * rho(lap, 0.7) - std::exp(-0.35) * rho(lap, -0.7)) < 1e-10);
    for (const auto& m : {NoiseModel::gaussian(0.5), NoiseModel::gaussian(2), NoiseModel::laplace(0.3),
                          NoiseModel::laplace(0.6)})
      for (double b : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        CHECK(std::abs(h_value(m, b) - h_value(m, -b)) < 1e-12);
        CHECK(std::abs(std::exp(b / 2) * rho(m, b) - std::exp(-b / 2) * rho(m, -b)) < 1e-10);
      }
  }
  SUBCASE("bound h(b) <= sup g exp(-b/2)") {
    for (const auto& m : {NoiseModel::gaussian(0.5), NoiseModel::gaussian(3), NoiseModel::laplace(0.6)})
      for (double b = 0; b <= 20; b += 0.5) CHECK(h_value(m, b) <= m.density_sup() * std::exp(-b / 2) * (1 + 1e-12));
  }
  SUBCASE("custom density reproduces the gaussian variant") {
    const double s = 0.8;
    const auto c = NoiseModel::custom([s](double w) { return norm_log_pdf((w + s * s / 2) / s) - std::log(s); },
                                      -10, 10, LogConcavity::yes);
    for (double b : {-1.0, 0.0, 0.5, 2.0}) CHECK(rho(c, b) == Approx(rho(NoiseModel::gaussian(s), b)).epsilon(1e-8));
  }
}

TEST_CASE("difference mass") {
  const auto t = NoiseModel::two_point(0.2, 0.6);
  const auto mass = difference_mass(t);
  const TwoPointNoise tp{0.2, 0.6};
  double total = 0, tilt = 0;
  for (const auto& p : mass) {
    total += p.prob;
    tilt += p.prob * std::exp(p.b / 2) * (std::abs(p.b) > 0 ? 1 : 0);
  }
  CHECK(total == Approx(1.0).epsilon(1e-15));
  CHECK(mass.size() == 3);
  // symmetry of the tilted mass function: exp(b/2) P(B=b) = exp(-b/2) P(B=-b)
  double up = 0, down = 0;
  for (const auto& p : mass) {
    if (p.b > 0) up = std::exp(p.b / 2) * p.prob;
    if (p.b < 0) down = std::exp(p.b / 2) * p.prob;
  }
  CHECK(up == Approx(down).epsilon(1e-13));
  CHECK(tilt > 0);
  const auto none = difference_mass(NoiseModel::none());
  REQUIRE(none.size() == 1);
  CHECK(none[0].b == 0.0);
  CHECK(none[0].prob == 1.0);
  CHECK(tp.k() == Approx(std::log(tp.a() / 0.2)));
}

TEST_CASE("w_star csv") {
  const auto dir = std::filesystem::temp_directory_path() / "psmrwm_noise_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "ok.csv");
    f << "w_star\n-0.5\n0.25\n\n0.1\n";
  }
  {
    std::ofstream f(dir / "bad.csv");
    f << "w\n0.1\n";
  }
  const auto w = read_w_star_csv(dir / "ok.csv");
  CHECK(w == std::vector<double>{-0.5, 0.25, 0.1});
  CHECK_THROWS(read_w_star_csv(dir / "bad.csv"));
  CHECK_THROWS(read_w_star_csv(dir / "missing.csv"));
}

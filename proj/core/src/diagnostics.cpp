#include "psmrwm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>

#include "psmrwm/random.hpp"

namespace psmrwm {

double ess(std::span<const double> series, std::size_t discard) {
  if (series.size() <= discard + 10) throw std::invalid_argument("ess: series too short");
  const auto xs = series.subspan(discard);
  const std::size_t n = xs.size();
  double mean = 0.0;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = xs[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += c[i] * c[i + lag];
    return acc / static_cast<double>(n);
  };

  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) throw std::invalid_argument("ess: degenerate series");

  // Geyer: pair sums Gamma_k = gamma(2k) + gamma(2k+1) are positive and
  // decreasing for a reversible chain; stop at the first non-positive one.
  double tau = -gamma0;  // tau * gamma0 = -gamma0 + 2 sum Gamma_k
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (k == 0 ? gamma0 : autocov(2 * k)) + autocov(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau /= gamma0;
  const double nn = static_cast<double>(n);
  return std::clamp(nn / tau, 1.0, nn);
}

EssReport ess_report(const Eigen::MatrixXd& chain, std::size_t discard) {
  EssReport r;
  r.discard = discard;
  r.iters_used = static_cast<std::size_t>(chain.rows()) - std::min<std::size_t>(discard, chain.rows());
  std::vector<double> col(static_cast<std::size_t>(chain.rows()));
  for (Eigen::Index j = 0; j < chain.cols(); ++j) {
    for (Eigen::Index i = 0; i < chain.rows(); ++i) col[static_cast<std::size_t>(i)] = chain(i, j);
    r.per_component.push_back(ess(col, discard));
  }
  r.min_ess = r.per_component.empty() ? 0.0 : *std::min_element(r.per_component.begin(), r.per_component.end());
  return r;
}

double empirical_esjd(const Eigen::MatrixXd& chain) {
  if (chain.rows() < 2) throw std::invalid_argument("empirical_esjd: need at least two states");
  double acc = 0.0;
  for (Eigen::Index i = 1; i < chain.rows(); ++i) acc += (chain.row(i) - chain.row(i - 1)).squaredNorm();
  return acc / static_cast<double>(chain.rows() - 1);
}

SampleMoments sample_moments(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_moments: need at least two values");
  const double n = static_cast<double>(xs.size());
  SampleMoments m;
  for (double v : xs) m.mean += v;
  m.mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : xs) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m.variance = m2 / (n - 1.0);
  if (m2 > 0.0) m.skewness = (m3 / n) / std::pow(m2 / n, 1.5);
  return m;
}

double silverman_bandwidth(std::span<const double> xs) {
  const auto mom = sample_moments(xs);
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  const double sd = std::sqrt(mom.variance);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(static_cast<double>(xs.size()), -0.2);
}

Kde gaussian_kde(std::span<const double> xs, int points) {
  if (points < 2) throw std::invalid_argument("gaussian_kde: need at least two grid points");
  Kde k;
  k.bandwidth = silverman_bandwidth(xs);
  if (!(k.bandwidth > 0.0)) throw std::invalid_argument("gaussian_kde: degenerate sample");
  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *lo_it - 4.0 * k.bandwidth;
  const double hi = *hi_it + 4.0 * k.bandwidth;
  const double norm = 1.0 / (static_cast<double>(xs.size()) * k.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  k.grid.resize(static_cast<std::size_t>(points));
  k.density.assign(static_cast<std::size_t>(points), 0.0);
  for (int g = 0; g < points; ++g) {
    const double at = lo + (hi - lo) * g / (points - 1);
    double acc = 0.0;
    for (double v : xs) {
      const double u = (at - v) / k.bandwidth;
      acc += std::exp(-0.5 * u * u);
    }
    k.grid[static_cast<std::size_t>(g)] = at;
    k.density[static_cast<std::size_t>(g)] = acc * norm;
  }
  return k;
}

std::vector<NoiseStudyRow> noise_study(const EstimatorFactory& make, const Eigen::VectorXd& x_ref,
                                       std::span<const int> m_list, std::size_t reps, std::uint64_t seed) {
  if (reps < 100) throw std::invalid_argument("noise_study: need at least 100 replicates");
  std::vector<NoiseStudyRow> rows;
  for (std::size_t idx = 0; idx < m_list.size(); ++idx) {
    const int m = m_list[idx];
    const auto estimator = make(m);
    Rng rng(cell_seed(seed, idx));
    std::vector<double> est(reps);
    for (double& e : est) e = estimator->estimate_log_target(x_ref, rng);

    NoiseStudyRow row;
    row.m = m;
    const auto mom = sample_moments(est);
    for (double& e : est) e -= mom.mean;
    row.variance = mom.variance;
    row.skewness = mom.skewness;
    row.degenerate = !(mom.variance > 0.0);
    if (!row.degenerate) row.kde = gaussian_kde(est);
    rows.push_back(std::move(row));
  }
  return rows;
}

EfficiencyTable relative_efficiencies(std::span<const CellResult> cells) {
  if (cells.empty()) throw std::invalid_argument("relative_efficiencies: no cells");
  EfficiencyTable table;
  std::map<int, double> best_by_m;
  std::map<double, double> best_by_lambda;
  for (const auto& c : cells) {
    if (!(c.wall_seconds > 0.0)) throw std::invalid_argument("relative_efficiencies: non-positive run time");
    const double rate = c.min_ess / c.wall_seconds;
    table.rows.push_back({c, rate, 0.0, 0.0});
    auto [im, new_m] = best_by_m.try_emplace(c.m, rate);
    if (!new_m) im->second = std::max(im->second, rate);
    auto [il, new_l] = best_by_lambda.try_emplace(c.lambda, rate);
    if (!new_l) il->second = std::max(il->second, rate);
  }
  for (auto& r : table.rows) {
    r.ess_star = r.ess_per_s / best_by_m.at(r.cell.m);
    r.ess_starstar = r.ess_per_s / best_by_lambda.at(r.cell.lambda);
  }
  return table;
}

SlopeFit variance_slope(std::span<const double> m_values, std::span<const double> variances) {
  if (m_values.size() != variances.size() || m_values.size() < 3)
    throw std::invalid_argument("variance_slope: need matching lists of at least three points");
  const std::size_t n = m_values.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(m_values[i] > 0.0) || !(variances[i] > 0.0))
      throw std::invalid_argument("variance_slope: values must be positive");
    lx[i] = std::log(m_values[i]);
    ly[i] = std::log(variances[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("variance_slope: all m values equal");
  SlopeFit fit{sxy / sxx, 0.0};
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - my - fit.slope * (lx[i] - mx);
    rss += r * r;
  }
  fit.std_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  return fit;
}

}  // namespace psmrwm

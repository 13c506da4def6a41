#include "psmrwm/gp_logistic.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "psmrwm/errors.hpp"
#include "psmrwm/normal.hpp"

namespace psmrwm {

namespace {

using nlohmann::json;

double softplus(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

std::size_t covariates_for(std::size_t d) {
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("parameter vector must have even length 2 + 2a");
  return (d - 2) / 2;
}

}  // namespace

GpParams param_map(const Eigen::VectorXd& x) {
  const auto a = static_cast<Eigen::Index>(covariates_for(static_cast<std::size_t>(x.size())));
  GpParams p;
  p.mu = x[0];
  p.beta = x.segment(1, a);
  p.tau2 = std::exp(x[1 + a]);
  p.phi = x.segment(2 + a, a).array().exp();
  return p;
}

Eigen::VectorXd param_unmap(const GpParams& p) {
  const auto a = p.beta.size();
  if (p.phi.size() != a) throw std::invalid_argument("beta and phi must have equal length");
  if (!(p.tau2 > 0.0) || (p.phi.array() <= 0.0).any()) throw std::domain_error("tau2 and phi must be positive");
  Eigen::VectorXd x(2 + 2 * a);
  x[0] = p.mu;
  x.segment(1, a) = p.beta;
  x[1 + a] = std::log(p.tau2);
  x.segment(2 + a, a) = p.phi.array().log();
  return x;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& z, const Eigen::VectorXd& phi) {
  if (phi.size() != z.cols()) throw std::invalid_argument("phi must have one entry per coordinate");
  if ((phi.array() <= 0.0).any()) throw std::domain_error("range parameters phi must be positive");
  const Eigen::MatrixXd scaled = z * phi.cwiseInverse().asDiagonal();
  const auto l = z.rows();
  Eigen::MatrixXd r(l, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = std::exp(-(scaled.row(i) - scaled.row(j)).norm());
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

Eigen::MatrixXd grid_points(const GridSpec& spec) {
  if (spec.axes < 1 || spec.levels < 2) throw std::invalid_argument("grid needs >= 1 axis and >= 2 levels");
  Eigen::Index count = 1;
  for (int k = 0; k < spec.axes; ++k) count *= spec.levels;
  Eigen::MatrixXd z(count, spec.axes);
  for (Eigen::Index i = 0; i < count; ++i) {
    Eigen::Index rem = i;
    for (int k = spec.axes - 1; k >= 0; --k) {
      const auto level = rem % spec.levels;
      rem /= spec.levels;
      z(i, k) = spec.lo + (spec.hi - spec.lo) * static_cast<double>(level) / (spec.levels - 1);
    }
  }
  return z;
}

Eigen::VectorXd canonical_true_x() {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(10);
  x[0] = 0.5;
  x[1] = -1.0;
  x[4] = 1.0;
  return x;
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& a, double jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double mean_diag = a.diagonal().mean();
  double add = jitter * (mean_diag > 0.0 ? mean_diag : 1.0);
  for (int attempt = 0; attempt <= 6; ++attempt, add *= 2.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += add;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw FactorizationError("Cholesky factorisation failed after jitter");
}

GpDataset simulate_dataset(const Eigen::VectorXd& true_x, int n, const GridSpec& grid, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("trials per site must be positive");
  GpDataset data;
  data.z_points = grid_points(grid);
  if (static_cast<std::size_t>(true_x.size()) != 2 + 2 * static_cast<std::size_t>(grid.axes))
    throw std::invalid_argument("true_x length does not match the grid dimension");
  data.n = n;
  data.true_x = true_x;
  data.seed = seed;

  const auto p = param_map(true_x);
  const auto l = data.z_points.rows();
  const Eigen::MatrixXd chol = cholesky_with_jitter(p.tau2 * correlation_matrix(data.z_points, p.phi), 1e-10);

  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(l);
  for (Eigen::Index i = 0; i < l; ++i) z[i] = normal(rng);
  const Eigen::VectorXd s = chol * z;
  const Eigen::VectorXd eta = s.array() + p.mu + (data.z_points * p.beta).array();

  data.y.resize(static_cast<std::size_t>(l));
  for (Eigen::Index i = 0; i < l; ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-eta[i]));
    data.y[static_cast<std::size_t>(i)] = std::binomial_distribution<int>(n, prob)(rng);
  }
  return data;
}

std::string dataset_to_json(const GpDataset& data) {
  json j;
  json z = json::array();
  for (Eigen::Index i = 0; i < data.z_points.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < data.z_points.cols(); ++k) row.push_back(data.z_points(i, k));
    z.push_back(std::move(row));
  }
  j["z_points"] = std::move(z);
  j["y"] = data.y;
  j["n"] = data.n;
  j["true_x"] = std::vector<double>(data.true_x.data(), data.true_x.data() + data.true_x.size());
  j["seed"] = data.seed;
  return j.dump(2) + "\n";
}

GpDataset dataset_from_json(const std::string& text) {
  const json j = json::parse(text);
  GpDataset data;
  const auto& z = j.at("z_points");
  const auto l = static_cast<Eigen::Index>(z.size());
  const auto a = l > 0 ? static_cast<Eigen::Index>(z.at(0).size()) : 0;
  data.z_points.resize(l, a);
  for (Eigen::Index i = 0; i < l; ++i) {
    if (static_cast<Eigen::Index>(z.at(i).size()) != a) throw std::runtime_error("ragged z_points");
    for (Eigen::Index k = 0; k < a; ++k) data.z_points(i, k) = z.at(i).at(k).get<double>();
  }
  data.y = j.at("y").get<std::vector<int>>();
  data.n = j.at("n").get<int>();
  const auto tx = j.at("true_x").get<std::vector<double>>();
  data.true_x = Eigen::Map<const Eigen::VectorXd>(tx.data(), static_cast<Eigen::Index>(tx.size()));
  data.seed = j.at("seed").get<std::uint64_t>();
  if (static_cast<Eigen::Index>(data.y.size()) != l) throw std::runtime_error("y and z_points disagree in length");
  for (int v : data.y)
    if (v < 0 || v > data.n) throw std::runtime_error("count outside [0, n]");
  return data;
}

void save_dataset(const std::filesystem::path& path, const GpDataset& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dataset_to_json(data);
}

GpDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return dataset_from_json(buf.str());
}

TransformedCounts transform_counts(std::span<const int> y, int n) {
  TransformedCounts t;
  const auto l = static_cast<Eigen::Index>(y.size());
  t.y_star.resize(l);
  t.d_inv.resize(l);
  for (Eigen::Index i = 0; i < l; ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    if (yi < 0 || yi > n) throw std::invalid_argument("count outside [0, n]");
    const double plus = yi == 0 ? 0.5 : (yi == n ? n - 0.5 : static_cast<double>(yi));
    t.y_star[i] = logit(plus / n);
    t.d_inv[i] = plus * (1.0 - plus / n);
  }
  return t;
}

ConditionalMoments gaussian_conditional(const Eigen::MatrixXd& prior_cov, const Eigen::VectorXd& d_inv,
                                        const Eigen::VectorXd& residual) {
  // With W = diag(d_inv) and B = I + W^1/2 K W^1/2:
  //   cov  = K - (L_B^-1 W^1/2 K)' (L_B^-1 W^1/2 K)
  //   mean = K W^1/2 B^-1 W^1/2 r
  // Neither K nor D is inverted, so K -> 0 and W -> 0 are both fine.
  const Eigen::VectorXd w_half = d_inv.cwiseSqrt();
  Eigen::MatrixXd b = w_half.asDiagonal() * prior_cov * w_half.asDiagonal();
  b.diagonal().array() += 1.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(b);
  if (llt.info() != Eigen::Success) throw FactorizationError("I + W^1/2 K W^1/2 is not positive definite");

  Eigen::MatrixXd v = w_half.asDiagonal() * prior_cov;
  llt.matrixL().solveInPlace(v);

  ConditionalMoments out;
  out.cov = prior_cov;
  out.cov.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose(), -1.0);
  out.cov = out.cov.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd t = llt.solve(w_half.cwiseProduct(residual));
  out.mean = prior_cov * w_half.cwiseProduct(t);
  return out;
}

ConditionalMoments conditional_moments(const Eigen::VectorXd& x, const GpDataset& data) {
  const auto p = param_map(x);
  const auto t = transform_counts(data.y, data.n);
  const Eigen::MatrixXd k = p.tau2 * correlation_matrix(data.z_points, p.phi);
  const Eigen::VectorXd offset = (data.z_points * p.beta).array() + p.mu;
  return gaussian_conditional(k, t.d_inv, t.y_star - offset);
}

GpImportanceSampler::GpImportanceSampler(const Eigen::VectorXd& x, const GpDataset& data, const IsConfig& config)
    : data_(data), config_(config) {
  if (config.m < 1) throw std::invalid_argument("number of importance samples must be >= 1");
  if (!(config.nu > 2.0)) throw std::invalid_argument("degrees of freedom must exceed 2");
  if (static_cast<std::size_t>(x.size()) != data.dimension())
    throw std::invalid_argument("parameter vector has the wrong dimension");

  const auto p = param_map(x);
  const auto l = static_cast<double>(data.sites());
  const double d = static_cast<double>(x.size());
  log_prior_ = -0.5 * x.squaredNorm() - d * kLogSqrt2Pi;

  const Eigen::MatrixXd k = p.tau2 * correlation_matrix(data.z_points, p.phi);
  prior_chol_ = cholesky_with_jitter(k, config.jitter);
  prior_log_det_half_ = prior_chol_.diagonal().array().log().sum();

  offset_ = (data.z_points * p.beta).array() + p.mu;
  const auto t = transform_counts(data.y, data.n);
  moments_ = gaussian_conditional(k, t.d_inv, t.y_star - offset_);
  prop_chol_ = cholesky_with_jitter(moments_.cov, config.jitter);

  const double nu = config.nu;
  t_log_norm_ = std::lgamma(0.5 * (nu + l)) - std::lgamma(0.5 * nu) - 0.5 * l * std::log(nu * std::numbers::pi) -
                prop_chol_.diagonal().array().log().sum();
}

Eigen::VectorXd GpImportanceSampler::draw(Rng& rng) const {
  const auto l = static_cast<Eigen::Index>(data_.sites());
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(l);
  for (Eigen::Index i = 0; i < l; ++i) z[i] = normal(rng);
  const double chi2 = std::chi_squared_distribution<double>(config_.nu)(rng);
  return moments_.mean + (prop_chol_.triangularView<Eigen::Lower>() * z) / std::sqrt(chi2 / config_.nu);
}

double GpImportanceSampler::log_weight(const Eigen::VectorXd& s) const {
  const auto l = static_cast<double>(data_.sites());
  double loglik = 0.0;
  for (std::size_t i = 0; i < data_.sites(); ++i) {
    const double eta = s[static_cast<Eigen::Index>(i)] + offset_[static_cast<Eigen::Index>(i)];
    loglik += data_.y[i] * eta - data_.n * softplus(eta);
  }
  const Eigen::VectorXd u = prior_chol_.triangularView<Eigen::Lower>().solve(s);
  const double log_prior_s = -0.5 * u.squaredNorm() - prior_log_det_half_ - l * kLogSqrt2Pi;
  const Eigen::VectorXd v = prop_chol_.triangularView<Eigen::Lower>().solve(s - moments_.mean);
  const double log_q = t_log_norm_ - 0.5 * (config_.nu + l) * std::log1p(v.squaredNorm() / config_.nu);
  return loglik + log_prior_s - log_q;
}

double GpImportanceSampler::estimate_from_draws(std::span<const Eigen::VectorXd> draws) const {
  if (draws.empty()) throw std::invalid_argument("no importance draws");
  double acc = -std::numeric_limits<double>::infinity();
  for (const auto& s : draws) acc = log_add_exp(acc, log_weight(s));
  return log_prior_ + acc - std::log(static_cast<double>(draws.size()));
}

double GpImportanceSampler::estimate(Rng& rng) const {
  double acc = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < config_.m; ++j) acc = log_add_exp(acc, log_weight(draw(rng)));
  return log_prior_ + acc - std::log(static_cast<double>(config_.m));
}

double estimate_log_posterior(const Eigen::VectorXd& x, const GpDataset& data, const IsConfig& config, Rng& rng) {
  return GpImportanceSampler(x, data, config).estimate(rng);
}

GpLogisticTarget::GpLogisticTarget(GpDataset data, IsConfig config)
    : data_(std::move(data)), config_(config) {}

double GpLogisticTarget::estimate_log_target(const Eigen::VectorXd& x, Rng& rng) const {
  return estimate_log_posterior(x, data_, config_, rng);
}

}  // namespace psmrwm

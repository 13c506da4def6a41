#include "psmrwm/sampler.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "psmrwm/csv.hpp"
#include "psmrwm/errors.hpp"

namespace psmrwm {

PseudoMarginalRwm::PseudoMarginalRwm(const TargetEstimator& estimator, double lambda,
                                     const Eigen::MatrixXd& v_hat)
    : estimator_(estimator), lambda_(lambda) {
  const auto d = static_cast<Eigen::Index>(estimator.dimension());
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
  if (v_hat.rows() != d || v_hat.cols() != d)
    throw std::invalid_argument("v_hat must be d x d with d = " + std::to_string(d));
  Eigen::LLT<Eigen::MatrixXd> llt(v_hat);
  if (llt.info() != Eigen::Success) throw FactorizationError("v_hat is not positive definite");
  chol_ = llt.matrixL();
  z_.resize(d);
  proposal_.resize(d);
}

ChainState PseudoMarginalRwm::initialize(const Eigen::VectorXd& x0, Rng& rng) const {
  if (x0.size() != static_cast<Eigen::Index>(estimator_.dimension()))
    throw std::invalid_argument("initial point has the wrong dimension");
  const double est = estimator_.estimate_log_target(x0, rng);
  if (std::isnan(est)) throw ChainAbort("NaN estimate at the initial point", 0);
  if (est == -std::numeric_limits<double>::infinity())
    throw ChainAbort("initial point has a -inf log-target estimate", 0);
  return {x0, est};
}

bool PseudoMarginalRwm::step(ChainState& state, Rng& rng) {
  ++iteration_;
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < z_.size(); ++i) z_[i] = normal(rng);
  proposal_.noalias() = chol_.triangularView<Eigen::Lower>() * z_;
  proposal_ = state.x + lambda_ * proposal_;

  const double est = estimator_.estimate_log_target(proposal_, rng);
  if (std::isnan(est)) throw ChainAbort("estimator returned NaN", iteration_);

  const double log_u = std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  if (log_u < est - state.log_pi_hat) {
    state.x.swap(proposal_);
    state.log_pi_hat = est;
    return true;
  }
  return false;
}

double RunResult::acceptance_rate() const {
  if (accept_flags.empty()) return 0.0;
  std::size_t n = 0;
  for (char a : accept_flags) n += a ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(accept_flags.size());
}

double RunResult::mean_sq_jump() const {
  return accept_flags.empty() ? 0.0 : sum_sq_jump / static_cast<double>(accept_flags.size());
}

namespace {

class CountingEstimator final : public TargetEstimator {
 public:
  explicit CountingEstimator(const TargetEstimator& inner) : inner_(inner) {}
  std::size_t dimension() const override { return inner_.dimension(); }
  double estimate_log_target(const Eigen::VectorXd& x, Rng& rng) const override {
    ++calls;
    return inner_.estimate_log_target(x, rng);
  }
  mutable std::size_t calls = 0;

 private:
  const TargetEstimator& inner_;
};

}  // namespace

RunResult run_chain(const ChainConfig& config, const TargetEstimator& estimator, const RunOptions& options) {
  const auto d = static_cast<Eigen::Index>(estimator.dimension());
  RunResult out;
  if (config.iters == 0) return out;

  const auto t0 = std::chrono::steady_clock::now();
  CountingEstimator counted(estimator);
  PseudoMarginalRwm kernel(counted, config.lambda, config.v_hat);
  Rng rng(config.seed);
  ChainState state = kernel.initialize(config.initial_x, rng);

  out.log_estimates.reserve(config.iters);
  out.accept_flags.reserve(config.iters);
  if (options.store_chain) out.chain.resize(static_cast<Eigen::Index>(config.iters), d);

  Eigen::VectorXd prev = state.x;
  for (std::size_t t = 0; t < config.iters; ++t) {
    const bool accepted = kernel.step(state, rng);
    if (accepted) {
      out.sum_sq_jump += (state.x - prev).squaredNorm();
      prev = state.x;
    }
    out.log_estimates.push_back(state.log_pi_hat);
    out.accept_flags.push_back(accepted ? 1 : 0);
    if (options.store_chain) out.chain.row(static_cast<Eigen::Index>(t)) = state.x.transpose();
    if (options.on_step) options.on_step(t, state, accepted);
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.estimator_calls = counted.calls;
  return out;
}

void write_chain_csv(const std::filesystem::path& path, const RunResult& result) {
  if (result.chain.rows() != static_cast<Eigen::Index>(result.iters()))
    throw std::invalid_argument("write_chain_csv: chain was not stored");
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < result.chain.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
  header.emplace_back("log_estimate");
  header.emplace_back("accepted");
  CsvWriter csv(path, header);
  for (Eigen::Index i = 0; i < result.chain.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index j = 0; j < result.chain.cols(); ++j) row.push_back(csv_num(result.chain(i, j)));
    row.push_back(csv_num(result.log_estimates[static_cast<std::size_t>(i)]));
    row.push_back(result.accept_flags[static_cast<std::size_t>(i)] ? "1" : "0");
    csv.row(row);
  }
}

double scaling_from_ell(double ell, double s_d) {
  if (!(s_d > 0.0)) throw std::domain_error("roughness s_d must be positive");
  if (!(ell > 0.0)) throw std::domain_error("ell must be positive");
  return ell / std::sqrt(s_d);
}

double product_roughness(std::size_t d, double mean_second_derivative) {
  if (!(mean_second_derivative < 0.0)) throw std::domain_error("E[f''] must be negative");
  return -static_cast<double>(d) / mean_second_derivative;
}

SyntheticNoiseTarget::SyntheticNoiseTarget(std::size_t dimension, LogDensity base, NoiseModel noise)
    : dim_(dimension), base_(std::move(base)), noise_(std::move(noise)) {
  if (dim_ == 0) throw std::invalid_argument("dimension must be positive");
  if (!base_) throw std::invalid_argument("empty base log-density");
}

double SyntheticNoiseTarget::estimate_log_target(const Eigen::VectorXd& x, Rng& rng) const {
  return base_(x) + sample_noise(noise_, rng, false);
}

std::shared_ptr<SyntheticNoiseTarget> synthetic_noise_target(std::size_t dimension, LogDensity base,
                                                             NoiseModel noise) {
  return std::make_shared<SyntheticNoiseTarget>(dimension, std::move(base), std::move(noise));
}

LogDensity standard_normal_product() {
  return [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
}

}  // namespace psmrwm

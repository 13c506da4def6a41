#include <benchmark/benchmark.h>

#include "psmrwm/efficiency_theory.hpp"
#include "psmrwm/gp_logistic.hpp"
#include "psmrwm/sampler.hpp"

using namespace psmrwm;

static void BM_FBundle(benchmark::State& state) {
  double b = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f_bundle(b, 2.4));
    b = b < 30 ? b * 1.01 : 0.01;
  }
}
BENCHMARK(BM_FBundle);

static void BM_EsjdSetup(benchmark::State& state) {
  const auto noise = NoiseModel::laplace(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(EsjdFunction(noise));
}
BENCHMARK(BM_EsjdSetup)->Unit(benchmark::kMillisecond);

static void BM_EsjdEvaluate(benchmark::State& state) {
  const EsjdFunction j(NoiseModel::gaussian(1.0));
  double ell = 2.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(j(ell));
    ell = ell < 3.0 ? ell + 1e-3 : 2.0;
  }
}
BENCHMARK(BM_EsjdEvaluate)->Unit(benchmark::kMicrosecond);

static void BM_OptimalScalingGaussian(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(optimal_scaling(NoiseModel::gaussian(1.0)));
}
BENCHMARK(BM_OptimalScalingGaussian)->Unit(benchmark::kMillisecond);

static void BM_GpEstimate(benchmark::State& state) {
  static const GpDataset data = simulate_dataset(canonical_true_x(), 10, GridSpec{}, 1);
  const GpLogisticTarget target(data, IsConfig{static_cast<int>(state.range(0)), 20.0, 1e-10});
  const Eigen::VectorXd x = canonical_true_x();
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(target.estimate_log_target(x, rng));
}
BENCHMARK(BM_GpEstimate)->Arg(20)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

static void BM_SamplerStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto target = synthetic_noise_target(d, standard_normal_product(), NoiseModel::gaussian(1.0));
  const auto n = static_cast<Eigen::Index>(d);
  PseudoMarginalRwm kernel(*target, 2.38 / std::sqrt(static_cast<double>(d)), Eigen::MatrixXd::Identity(n, n));
  Rng rng(2);
  auto s = kernel.initialize(Eigen::VectorXd::Zero(n), rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernel.step(s, rng));
}
BENCHMARK(BM_SamplerStep)->Arg(10)->Arg(100);
BENCHMARK_MAIN();

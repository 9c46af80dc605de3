#include <vinestress/bicop.hpp>
#include <vinestress/regimes.hpp>
#include <vinestress/resample.hpp>
#include <vinestress/rvine.hpp>
#include <vinestress/scenario.hpp>
#include <vinestress/simstudy.hpp>
#include <vinestress/univariate.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace vinestress;

namespace {

BivariateCopula family_at(int i)
{
  switch (i) {
  case 0: return BivariateCopula::gaussian(0.5);
  case 1: return BivariateCopula::student_t(0.5, 4.0);
  case 2: return BivariateCopula::clayton(2.0);
  case 3: return BivariateCopula::frank(5.0);
  default: return BivariateCopula::bb1(0.8, 1.5);
  }
}

void BM_PairEvaluate(benchmark::State& state)
{
  const auto c = family_at(static_cast<int>(state.range(0)));
  state.SetLabel(to_string(c.family));
  double u = 0.1;
  for (auto _ : state) {
    u = u > 0.9 ? 0.1 : u + 0.013;
    benchmark::DoNotOptimize(bicop_evaluate(u, 1.0 - u * 0.7, c));
  }
}
BENCHMARK(BM_PairEvaluate)->DenseRange(0, 4);

void BM_PairFit(benchmark::State& state)
{
  const auto c = family_at(static_cast<int>(state.range(0)));
  state.SetLabel(to_string(c.family));
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd uv = bicop_simulate(c, 3000, rng);
  const std::vector<double> u(uv.col(0).data(), uv.col(0).data() + 3000);
  const std::vector<double> v(uv.col(1).data(), uv.col(1).data() + 3000);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_bicop(u, v, c.family));
}
BENCHMARK(BM_PairFit)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

RVineModel standin_copula(int d)
{
  RVineModel m;
  std::vector<int> order(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j)
    order[static_cast<std::size_t>(j)] = j;
  m.structure = cvine_structure(order);
  for (std::size_t k = 0; k < m.structure.trees.size(); ++k) {
    std::vector<BivariateCopula> t;
    for (std::size_t e = 0; e < m.structure.trees[k].size(); ++e)
      t.push_back(k == 0 ? BivariateCopula::student_t(0.4, 5.0) : BivariateCopula::gaussian(0.1));
    m.copulas.push_back(t);
  }
  return m;
}

void BM_VineLogDensity(benchmark::State& state)
{
  const int d = static_cast<int>(state.range(0));
  const auto m = standin_copula(d);
  const Eigen::MatrixXd u = rvine_simulate_uniform(m, 64, 3);
  Eigen::Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rvine_copula_log_density(u.row(i).transpose(), m));
    i = (i + 1) % u.rows();
  }
}
BENCHMARK(BM_VineLogDensity)->Arg(4)->Arg(5)->Arg(18);

void BM_VineSelectFit(benchmark::State& state)
{
  const int d = static_cast<int>(state.range(0));
  const Eigen::MatrixXd u = rvine_simulate_uniform(standin_copula(d), 3000, 5);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_rvine(u, std::nullopt));
}
BENCHMARK(BM_VineSelectFit)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_SkewTFit(benchmark::State& state)
{
  std::mt19937_64 rng(2);
  std::vector<double> x(3000);
  for (auto& v : x)
    v = skewt_sample({0.0, 1.0, 2.0, 3.0}, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_skewt(x));
}
BENCHMARK(BM_SkewTFit)->Unit(benchmark::kMillisecond);

void BM_TrueScenarioBivariateT(benchmark::State& state)
{
  const BivariateTSpec s;
  const double l = population_loss_quantile(s, 0.99);
  OptimizerConfig cfg;
  cfg.restarts = 4;
  cfg.iterations = 1500;
  cfg.patience = 150;
  for (auto _ : state)
    benchmark::DoNotOptimize(true_scenario(s, l, cfg));
}
BENCHMARK(BM_TrueScenarioBivariateT)->Unit(benchmark::kMillisecond);

void BM_EstimateCM3(benchmark::State& state)
{
  std::mt19937_64 rng(4);
  const auto smp = generate(BivariateTSpec{}, 3000, rng);
  const double l = empirical_quantile(std::span<const double>(smp.loss.data(), 3000), 0.99);
  const auto p = make_problem(smp.x, smp.loss, l, {});
  OptimizerConfig cfg;
  cfg.restarts = 2;
  cfg.iterations = 600;
  cfg.patience = 80;
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_cm3(p, cfg));
}
BENCHMARK(BM_EstimateCM3)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_MixtureEM(benchmark::State& state)
{
  std::mt19937_64 rng(5);
  const auto u = simulate_tcop_mixture({0.7, 0.8, -0.8, 4.0, 4.0}, 3000, rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(fit_tcop_mixture(u));
}
BENCHMARK(BM_MixtureEM)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_KernelPCA(benchmark::State& state)
{
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(state.range(0)), 5);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = nd(rng);
  KernelSpec k;
  k.type = KernelType::gaussian;
  for (auto _ : state)
    benchmark::DoNotOptimize(kernel_pca_first_component(x, k));
}
BENCHMARK(BM_KernelPCA)->Arg(500)->Arg(3000)->Unit(benchmark::kMillisecond)->Iterations(2);

void BM_BootstrapIndices(benchmark::State& state)
{
  BootstrapPlan plan;
  plan.n = 3000;
  std::mt19937_64 rng(7);
  for (auto _ : state)
    benchmark::DoNotOptimize(stationary_bootstrap_indices(plan, rng));
}
BENCHMARK(BM_BootstrapIndices);

} // namespace

BENCHMARK_MAIN();

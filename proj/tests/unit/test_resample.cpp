#include "doctest.h"
#include "oracles.hpp"

#include <vinestress/resample.hpp>

#include <map>
#include <random>

using namespace vinestress;

TEST_CASE("default block length")
{
  CHECK(default_mean_block(3077) == doctest::Approx(14.5443).epsilon(1e-4));
  BootstrapPlan p;
  p.n = 1000;
  CHECK(p.effective_mean_block() == doctest::Approx(10.0));
  p.mean_block = 3.0;
  CHECK(p.effective_mean_block() == 3.0);
}

TEST_CASE("plan validation")
{
  BootstrapPlan p;
  p.n = 10;
  CHECK_NOTHROW(validate(p));
  p.replications = 1;
  CHECK_THROWS_AS(validate(p), DomainError);
  p.replications = 2;
  p.mean_block = 0.5;
  CHECK_THROWS_AS(validate(p), DomainError);
  p.mean_block = 0.0;
  p.level = 1.0;
  CHECK_THROWS_AS(validate(p), DomainError);
}

TEST_CASE("geometric block lengths")
{
  std::mt19937_64 rng(3);
  for (double mean : {1.0, 2.5, 14.54}) {
    const int blocks = 10000;
    double total = 0.0;
    std::size_t ones = 0;
    for (int i = 0; i < blocks; ++i) {
      const auto l = geometric_block_length(mean, rng);
      CHECK(l >= 1);
      total += static_cast<double>(l);
      ones += l == 1;
    }
    CHECK(std::abs(total / blocks - mean) <= 0.1 * mean);
    // P(L = 1) = 1 / mean
    CHECK(std::abs(static_cast<double>(ones) / blocks - 1.0 / mean) < 0.02);
  }
}

TEST_CASE("stationary bootstrap indices")
{
  BootstrapPlan p;
  p.n = 3077;
  std::mt19937_64 a(42), b(42);
  std::vector<std::size_t> blocks;
  const auto ia = stationary_bootstrap_indices(p, a, &blocks);
  const auto ib = stationary_bootstrap_indices(p, b);
  CHECK(ia == ib);
  CHECK(ia.size() == 3077);
  CHECK(std::all_of(ia.begin(), ia.end(), [](std::size_t i) { return i < 3077; }));
  std::size_t sum = 0;
  for (auto l : blocks)
    sum += l;
  CHECK(sum == 3077);
  // within a block indices advance by one, wrapping around
  std::size_t pos = 0;
  for (auto l : blocks) {
    for (std::size_t k = 1; k < l; ++k)
      CHECK(ia[pos + k] == (ia[pos + k - 1] + 1) % 3077);
    pos += l;
  }

  // observed mean block length over >= 10^4 complete blocks
  std::mt19937_64 rng(9);
  std::vector<std::size_t> all;
  while (all.size() < 10000) {
    std::vector<std::size_t> bl;
    stationary_bootstrap_indices(p, rng, &bl);
    all.insert(all.end(), bl.begin(), bl.end() - 1);
  }
  double mean = 0.0;
  for (auto l : all)
    mean += static_cast<double>(l);
  mean /= static_cast<double>(all.size());
  CHECK(std::abs(mean - p.effective_mean_block()) <= 0.1 * p.effective_mean_block());

  // mean block 1 is iid resampling
  BootstrapPlan iid;
  iid.n = 50;
  iid.mean_block = 1.0;
  std::vector<std::size_t> ones;
  for (int r = 0; r < 2000; ++r)
    stationary_bootstrap_indices(iid, rng, &ones);
  double m1 = 0.0;
  for (auto l : ones)
    m1 += static_cast<double>(l);
  m1 /= static_cast<double>(ones.size());
  CHECK(m1 >= 1.0);
  CHECK(m1 <= 1.1);
}

TEST_CASE("resampled values follow the empirical distribution")
{
  // one coordinate per index vector gives independent draws whose law is
  // uniform over the rows
  BootstrapPlan p;
  p.n = 100;
  std::mt19937_64 rng(5);
  const int draws = 100000;
  std::vector<int> count(100, 0);
  for (int r = 0; r < draws; ++r)
    ++count[stationary_bootstrap_indices(p, rng)[37]];
  double chi2 = 0.0;
  const double e = draws / 100.0;
  for (int c : count)
    chi2 += (c - e) * (c - e) / e;
  // 99 degrees of freedom, upper 1% point
  CHECK(chi2 < 134.64);
}

TEST_CASE("percentile intervals and failure accounting")
{
  BootstrapPlan p;
  p.n = 10;
  p.replications = 2;
  const Eigen::Vector2d point(1.5, -2.0);
  auto same = [&](const std::vector<std::size_t>&, std::uint64_t) -> Eigen::VectorXd {
    return point;
  };
  const auto zero = bootstrap_ci(point, p, same);
  CHECK(zero.components[0].lower == 1.5);
  CHECK(zero.components[0].upper == 1.5);
  CHECK(zero.components[1].lower == -2.0);
  CHECK(zero.effective == 2);

  p.replications = 200;
  p.seed = 1000;
  auto by_seed = [](const std::vector<std::size_t>&, std::uint64_t s) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(1, static_cast<double>(s - 1000));
  };
  const auto r = bootstrap_ci(Eigen::VectorXd::Zero(1), p, by_seed);
  // values 0..199: type-7 quantiles at 0.025 and 0.975
  CHECK(r.components[0].lower == doctest::Approx(0.025 * 199));
  CHECK(r.components[0].upper == doctest::Approx(0.975 * 199));
  const auto par = bootstrap_ci(Eigen::VectorXd::Zero(1), p, by_seed, 4);
  CHECK(par.draws == r.draws);

  auto flaky = [](int every) {
    return [every](const std::vector<std::size_t>& idx, std::uint64_t s) -> Eigen::VectorXd {
      if (s % every == 0)
        throw EstimationError("forced");
      return Eigen::VectorXd::Constant(1, static_cast<double>(idx[0]));
    };
  };
  const auto ok = bootstrap_ci(Eigen::VectorXd::Zero(1), p, flaky(10));
  CHECK(ok.failures == 20);
  CHECK(ok.effective == 180);
  CHECK(ok.failure_messages.size() == 20);
  CHECK_THROWS_AS(bootstrap_ci(Eigen::VectorXd::Zero(1), p, flaky(4)), BootstrapError);
}

TEST_CASE("scenario bootstrap end to end")
{
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  const int n = 400;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd l(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = nd(rng);
    x(i, 1) = 0.5 * x(i, 0) + nd(rng);
    l(i) = 0.7 * x(i, 0) + 0.3 * x(i, 1);
  }
  const std::vector<double> lv(l.data(), l.data() + n);
  const double ell = empirical_quantile(lv, 0.9);
  ScenarioBootstrapConfig cfg;
  cfg.method = Method::cm3;
  cfg.optimizer.iterations = 150;
  cfg.optimizer.restarts = 1;
  cfg.optimizer.patience = 30;
  BootstrapPlan plan;
  plan.replications = 4;
  plan.seed = 3;
  const auto a = bootstrap_scenario_ci(x, l, ell, cfg, plan);
  CHECK(a.effective + a.failures == 4);
  REQUIRE(a.components.size() == 2);
  for (const auto& c : a.components)
    CHECK(c.lower <= c.upper);
  const auto b = bootstrap_scenario_ci(x, l, ell, cfg, plan);
  CHECK(a.draws == b.draws);
  cfg.freeze_structure = true;
  const auto f = bootstrap_scenario_ci(x, l, ell, cfg, plan);
  CHECK(f.components[0].point == a.components[0].point);

  cfg.method = Method::gkk;
  const auto g = bootstrap_scenario_ci(x, l, ell, cfg, plan);
  CHECK(g.effective == 4);
  cfg.method = Method::cm_star;
  CHECK_THROWS_AS(bootstrap_scenario_ci(x, l, ell, cfg, plan), EstimationError);
}

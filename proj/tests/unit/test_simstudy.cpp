#include "doctest.h"
#include "oracles.hpp"

#include <vinestress/errors.hpp>
#include <vinestress/simstudy.hpp>

#include <random>

using namespace vinestress;

namespace {

OptimizerConfig truth_config()
{
  OptimizerConfig c;
  c.restarts = 4;
  c.iterations = 1000;
  c.patience = 100;
  c.tolerance = 1e-13;
  return c;
}

std::vector<double> col(const Eigen::MatrixXd& m, int j)
{
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

} // namespace

TEST_CASE("bivariate t generator")
{
  BivariateTSpec s;
  std::mt19937_64 rng(1);
  const auto smp = generate_bivariate_t(s, 5000, rng);
  const Eigen::VectorXd a = smp.x.col(0).array() - smp.x.col(0).mean();
  const Eigen::VectorXd b = smp.x.col(1).array() - smp.x.col(1).mean();
  CHECK(std::abs(a.dot(b) / (a.norm() * b.norm()) - 0.5) < 0.03);
  const double tau = oracle::kendall_tau_bruteforce(col(smp.x, 0), col(smp.x, 1));
  CHECK(std::abs(tau - 1.0 / 3.0) < 0.03);
  for (Eigen::Index i = 0; i < 5000; ++i)
    CHECK(smp.loss(i) == 0.7 * smp.x(i, 0) + 0.3 * smp.x(i, 1));

  // density against the bivariate t formula
  for (double x1 : {-2.0, 0.3, 4.0})
    for (double x2 : {-1.0, 0.0, 2.5})
      CHECK(std::exp(true_log_density(s, Eigen::Vector2d(x1, x2))) ==
            doctest::Approx(oracle::bvt_density(x1, x2, 1, 0.5, 1, 4)).epsilon(1e-12));

  BivariateTSpec bad;
  bad.sigma << 1, 2, 2, 1;
  CHECK_THROWS_AS(validate(GeneratorSpec(bad)), DomainError);
  bad = {};
  bad.nu = 2.0;
  CHECK_THROWS_AS(validate(GeneratorSpec(bad)), DomainError);
}

TEST_CASE("meta-vine generator")
{
  const auto mv = meta_vine_standin();
  CHECK(validate_structure(mv.model.structure).empty());
  std::mt19937_64 rng(2);
  const auto smp = generate_meta_vine(mv, 5000, rng);
  const auto& m0 = mv.model.marginals[0];
  const double ks = oracle::ks_statistic(col(smp.x, 0), [&](double x) { return m0.cdf(x); });
  CHECK(ks < oracle::ks_critical_01(5000));
  for (Eigen::Index i = 0; i < 5000; ++i)
    CHECK(smp.loss(i) == doctest::Approx(smp.x.row(i).dot(mv.g)).epsilon(1e-14));
  // the stand-in places l = 0.03 near the 0.99 loss quantile
  const double q = population_loss_quantile(mv, 0.99, 100000);
  CHECK(std::abs(q - 0.03) < 0.003);
}

TEST_CASE("population threshold")
{
  BivariateTSpec s;
  const double q = population_loss_quantile(s, 0.99);
  CHECK(q == doctest::Approx(std::sqrt(0.79) * oracle::t_quantile(0.99, 4.0)).epsilon(1e-12));
  std::mt19937_64 rng(3);
  const auto smp = generate_bivariate_t(s, 200000, rng);
  std::vector<double> l(smp.loss.data(), smp.loss.data() + smp.loss.size());
  CHECK(std::abs(empirical_quantile(l, 0.99) - q) < 0.05);
}

TEST_CASE("true scenario")
{
  BivariateTSpec s;
  const double ell = population_loss_quantile(s, 0.99);
  const auto m = true_scenario(s, ell, truth_config());
  CHECK(std::abs(m(0) - 3.583) < 1e-3);
  CHECK(std::abs(m(1) - 2.740) < 1e-3);
  CHECK((m - elliptical_scenario(s, ell)).cwiseAbs().maxCoeff() < 1e-4);

  BivariateTSpec iso;
  iso.sigma.setIdentity();
  iso.w = Eigen::Vector2d(1.0, 0.0);
  const auto mi = true_scenario(iso, 2.0, truth_config());
  CHECK(mi(0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::abs(mi(1)) < 1e-4);

  const auto mv = meta_vine_standin();
  const auto mm = true_scenario(mv, 0.03, truth_config());
  CHECK(mv.g.dot(mm) == doctest::Approx(0.03).epsilon(1e-9));
  CHECK(mm(0) < 0.0);
}

TEST_CASE("summary measures")
{
  const std::vector<double> e{1.1, 0.9};
  CHECK(mpe(e, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rmspe(e, 1.0) == doctest::Approx(10.0));
  Eigen::MatrixXd one(1, 2);
  one << 3, 4;
  CHECK(ml2(one, Eigen::Vector2d::Zero()) == doctest::Approx(5.0));
  const std::vector<double> losses{0.02, 0.04};
  CHECK(exceedance_rate(losses, 0.03) == doctest::Approx(50.0));
  const std::vector<double> at{0.03};
  CHECK(exceedance_rate(at, 0.03) == 100.0);
}

TEST_CASE("small study")
{
  StudyConfig c;
  c.n = 800;
  c.replications = 3;
  c.methods = {Method::cm1, Method::cm2, Method::cm3, Method::cm_star, Method::gkk};
  c.optimizer.iterations = 200;
  c.optimizer.restarts = 1;
  c.optimizer.patience = 30;
  c.truth_optimizer = truth_config();
  c.level = 0.95;
  const auto r = run_study(c);
  CHECK(r.methods.size() == 5);
  for (const auto& s : r.methods) {
    CHECK(s.successes + s.failures == 3);
    CHECK(s.e_r >= 0.0);
    CHECK(s.e_r <= 100.0);
    for (std::size_t j = 0; j < s.mpe.size(); ++j)
      CHECK(s.rmspe[j] >= std::abs(s.mpe[j]) - 1e-12);
  }
  CHECK(r.get(Method::cm_star).e_r == 100.0);
  const auto again = run_study(c);
  CHECK(again.get(Method::cm3).estimates == r.get(Method::cm3).estimates);
  c.workers = 2;
  const auto par = run_study(c);
  CHECK(par.get(Method::cm1).estimates == r.get(Method::cm1).estimates);
  CHECK(format_report_table(r).find("cm_star") != std::string::npos);

  c.replications = 0;
  CHECK_THROWS_AS(run_study(c), DomainError);
}

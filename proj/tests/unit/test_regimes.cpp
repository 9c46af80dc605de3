#include "doctest.h"
#include "oracles.hpp"

#include <vinestress/bicop.hpp>
#include <vinestress/regimes.hpp>

#include <random>
#include <sstream>

using namespace vinestress;

namespace {

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
  const auto ra = pseudo_observations(std::vector<double>(a.data(), a.data() + a.size()));
  const auto rb = pseudo_observations(std::vector<double>(b.data(), b.data() + b.size()));
  const Eigen::Map<const Eigen::VectorXd> x(ra.data(), a.size()), y(rb.data(), b.size());
  const Eigen::VectorXd xc = x.array() - x.mean(), yc = y.array() - y.mean();
  return xc.dot(yc) / (xc.norm() * yc.norm());
}

Eigen::MatrixXd elliptical_sample(int n, int d, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  auto sigma = oracle::random_correlation(d, rng);
  Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  std::normal_distribution<double> nd;
  std::chi_squared_distribution<double> chi(6.0);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j)
      z(j) = nd(rng);
    x.row(i) = (l * z).transpose() * std::sqrt(6.0 / chi(rng));
  }
  return x;
}

// Accuracy of the Bayes classifier under the true mixture, with densities
// from the bivariate t formula.
double bayes_accuracy(const Eigen::MatrixXd& u, const std::vector<int>& labels, double pi,
                      double rho1, double rho2, double nu)
{
  int right = 0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double x = oracle::t_quantile(u(i, 0), nu), y = oracle::t_quantile(u(i, 1), nu);
    const double f1 = pi * oracle::bvt_density(x, y, 1, rho1, 1, nu);
    const double f2 = (1 - pi) * oracle::bvt_density(x, y, 1, rho2, 1, nu);
    right += (f1 >= f2 ? 1 : 2) == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(right) / static_cast<double>(u.rows());
}

} // namespace

TEST_CASE("linear kernel PCA equals classical PCA")
{
  const auto x = elliptical_sample(300, 4, 3);
  const auto s = kernel_pca_first_component(x);
  // classical PCA via the covariance eigen-decomposition
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xc.transpose() * xc);
  Eigen::VectorXd want = xc * es.eigenvectors().col(3);
  if (want.dot(xc.col(0)) < 0)
    want = -want;
  CHECK((s - want).cwiseAbs().maxCoeff() < 1e-8);

  Eigen::MatrixXd one(50, 1);
  for (int i = 0; i < 50; ++i)
    one(i, 0) = std::sin(i) + 0.1 * i;
  const auto s1 = kernel_pca_first_component(one);
  CHECK((s1 - (one.col(0).array() - one.col(0).mean()).matrix()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(kernel_pca_first_component(Eigen::MatrixXd::Ones(3, 3)), DomainError);
}

TEST_CASE("gaussian kernel PCA")
{
  const auto x = elliptical_sample(400, 3, 9);
  KernelSpec g{KernelType::gaussian, 0.0};
  const auto sg = kernel_pca_first_component(x, g);
  const auto sl = kernel_pca_first_component(x);
  CHECK(spearman(sg, sl) > 0.95);
  CHECK(sg.dot(x.col(0).array().matrix() - Eigen::VectorXd::Constant(400, x.col(0).mean())) > 0);

  // against a dense eigen-decomposition of the centered kernel matrix
  const double h = median_pairwise_distance(x);
  const int n = 400;
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / (2 * h * h));
  const Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c * k * c);
  Eigen::VectorXd want = std::sqrt(es.eigenvalues()(n - 1)) * es.eigenvectors().col(n - 1);
  if (want.dot(sg) < 0)
    want = -want;
  CHECK((sg - want).cwiseAbs().maxCoeff() < 1e-7);

  // constant data: kernel matrix centers to zero
  Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(20, 2);
  CHECK(kernel_pca_first_component(flat, {KernelType::gaussian, 1.0}).isZero());
}

TEST_CASE("median pairwise distance")
{
  Eigen::MatrixXd p(3, 1);
  p << 0, 1, 3;
  CHECK(median_pairwise_distance(p) == doctest::Approx(2.0));
  Eigen::MatrixXd q(4, 1);
  q << 0, 1, 3, 7;
  // distances 1 2 3 4 6 7
  CHECK(median_pairwise_distance(q) == doctest::Approx(3.5));
}

TEST_CASE("mixture density and posterior arithmetic")
{
  MixtureParams m{0.3, 0.7, -0.4, 5.0, 8.0};
  const double u = 0.2, v = 0.35;
  const double c1 = bicop_density(u, v, BivariateCopula::student_t(0.7, 5.0));
  const double c2 = bicop_density(u, v, BivariateCopula::student_t(-0.4, 8.0));
  CHECK(std::exp(mixture_log_density(u, v, m)) == doctest::Approx(0.3 * c1 + 0.7 * c2).epsilon(1e-10));
  Eigen::MatrixXd pt(1, 2);
  pt << u, v;
  const auto a = assign_clusters(pt, m);
  CHECK(a.posterior(0, 0) == doctest::Approx(0.3 * c1 / (0.3 * c1 + 0.7 * c2)).epsilon(1e-10));
  CHECK(a.posterior.row(0).sum() == doctest::Approx(1.0).epsilon(1e-14));

  // equal weights and a 10:1 density ratio
  MixtureParams h{0.5, 0.7, 0.7, 5.0, 5.0};
  const auto same = assign_clusters(pt, h);
  CHECK(same.posterior(0, 0) == doctest::Approx(0.5));
  CHECK(same.labels[0] == 1);
  // find a point where component 1 is ten times denser by bisection along u = v
  MixtureParams r{0.5, 0.8, -0.8, 4.0, 4.0};
  auto ratio = [&](double t) {
    return bicop_density(t, t, BivariateCopula::student_t(0.8, 4.0)) /
           bicop_density(t, t, BivariateCopula::student_t(-0.8, 4.0));
  };
  double lo = 0.5, hi = 0.999;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (ratio(mid) < 10.0 ? lo : hi) = mid;
  }
  pt << lo, lo;
  const auto ten = assign_clusters(pt, r);
  CHECK(ten.posterior(0, 0) == doctest::Approx(10.0 / 11.0).epsilon(1e-8));
  CHECK(ten.posterior(0, 1) == doctest::Approx(1.0 / 11.0).epsilon(1e-7));

  MixtureParams all1{1.0, 0.5, -0.5, 4.0, 4.0};
  std::mt19937_64 rng(1);
  const auto sample = simulate_tcop_mixture({0.5, 0.5, -0.5, 4, 4}, 200, rng);
  const auto a1 = assign_clusters(sample, all1);
  CHECK(std::all_of(a1.labels.begin(), a1.labels.end(), [](int l) { return l == 1; }));

  std::ostringstream os;
  write_assignment_csv(os, same);
  CHECK(os.str().rfind("row,posterior1,posterior2,label\n0,0.5", 0) == 0);
}

TEST_CASE("EM recovers a two-regime t-copula mixture")
{
  const MixtureParams truth{0.7, 0.8, -0.8, 4.0, 4.0};
  std::mt19937_64 rng(2024);
  std::vector<int> labels;
  const auto u = simulate_tcop_mixture(truth, 3000, rng, &labels);
  const auto fit = fit_tcop_mixture(u);
  CHECK(std::abs(fit.params.pi - 0.7) < 0.05);
  CHECK(std::abs(fit.params.rho1 - 0.8) < 0.05);
  CHECK(std::abs(fit.params.rho2 + 0.8) < 0.05);
  CHECK(fit.params.nu1 > 2.5);
  CHECK(fit.params.nu1 < 8.0);
  CHECK(fit.converged);
  for (std::size_t i = 1; i < fit.trace.size(); ++i)
    CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-9 * std::abs(fit.trace[i - 1]));
  CHECK(fit.loglik == doctest::Approx(mixture_loglik(u, fit.params)).epsilon(1e-10));

  const auto a = assign_clusters(u, fit.params);
  int right = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    right += a.labels[i] == labels[i];
    CHECK(std::abs(a.posterior.row(static_cast<Eigen::Index>(i)).sum() - 1.0) < 1e-12);
  }
  // no classifier beats the Bayes rule under the true parameters (~0.84 here)
  const double bayes = bayes_accuracy(u, labels, 0.7, 0.8, -0.8, 4.0);
  CHECK(right / 3000.0 >= bayes - 0.01);

  // label swap leaves the likelihood unchanged
  MixtureParams sw{1 - fit.params.pi, fit.params.rho2, fit.params.rho1, fit.params.nu2,
                   fit.params.nu1};
  CHECK(mixture_loglik(u, sw) == doctest::Approx(fit.loglik).epsilon(1e-12));

  // deterministic
  const auto again = fit_tcop_mixture(u);
  CHECK(again.params.rho1 == fit.params.rho1);
  CHECK(again.trace == fit.trace);
}

TEST_CASE("single-component data collapses or sits at the boundary")
{
  std::mt19937_64 rng(8);
  const auto u = bicop_simulate(BivariateCopula::student_t(0.8, 4.0), 2000, rng);
  bool flagged = false;
  try {
    const auto fit = fit_tcop_mixture(u);
    flagged = fit.near_boundary;
  } catch (const DegenerateMixtureError&) {
    flagged = true;
  }
  CHECK(flagged);
  CHECK_THROWS_AS(fit_tcop_mixture(u.topRows(100)), FitError);
}

TEST_CASE("regime pipeline on factors and loss")
{
  // Regime 1: loss rises with the factors; regime 2: it falls.
  std::mt19937_64 rng(77);
  const int n = 3000;
  std::vector<int> labels;
  const auto u = simulate_tcop_mixture({0.7, 0.8, -0.8, 4.0, 4.0}, n, rng, &labels);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd loss(n);
  for (int i = 0; i < n; ++i) {
    const double s = oracle::normal_quantile(u(i, 0));
    x(i, 0) = s + 0.1 * nd(rng);
    x(i, 1) = 0.8 * s + 0.1 * nd(rng);
    x(i, 2) = 0.6 * s + 0.1 * nd(rng);
    loss(i) = oracle::t_quantile(u(i, 1), 5.0);
  }
  const auto r = cluster_regimes(x, loss);
  int right = 0;
  for (int i = 0; i < n; ++i)
    right += r.assignment.labels[i] == labels[i];
  const double bayes = bayes_accuracy(u, labels, 0.7, 0.8, -0.8, 4.0);
  CHECK(right / double(n) >= bayes - 0.02);
  CHECK(r.fit.params.rho1 > 0.6);
  CHECK(r.fit.params.rho2 < -0.6);
}

#include "vinestress/regimes.hpp"

#include "dist.hpp"
#include "vinestress/bicop.hpp"
#include "vinestress/optim.hpp"
#include "vinestress/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <ostream>

namespace vinestress {

// ---------------------------------------------------------------------------
// Kernel PCA

double median_pairwise_distance(const Eigen::MatrixXd& data)
{
  const Eigen::Index n = data.rows();
  if (n < 2)
    throw DomainError("median_pairwise_distance: need at least two rows");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d.push_back((data.row(i) - data.row(j)).norm());
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0)
    med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med;
}

namespace {

constexpr double kEigenFloor = 1e-10;

// Leading eigenpair of a symmetric positive semidefinite matrix by subspace
// iteration with Rayleigh-Ritz.
std::pair<double, Eigen::VectorXd> leading_eigenpair(const Eigen::MatrixXd& a)
{
  const Eigen::Index n = a.rows();
  const Eigen::Index k = std::min<Eigen::Index>(n, 6);
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd q(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      q(i, j) = nd(rng);
  double lambda = 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < 5000; ++it) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a * q);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
    const Eigen::MatrixXd aq = a * q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.transpose() * aq);
    lambda = es.eigenvalues()(k - 1);
    v = q * es.eigenvectors().col(k - 1);
    const double resid = (aq * es.eigenvectors().col(k - 1) - lambda * v).norm();
    if (resid <= 1e-11 * std::max(lambda, 1e-300) || lambda <= kEigenFloor)
      break;
  }
  return {lambda, v};
}

} // namespace

Eigen::VectorXd kernel_pca_first_component(const Eigen::MatrixXd& data, const KernelSpec& k)
{
  const Eigen::Index n = data.rows(), d = data.cols();
  if (d < 1 || n <= d)
    throw DomainError("kernel PCA needs n > d >= 1");
  if (!data.allFinite())
    throw DomainError("kernel PCA: data must be finite");
  const Eigen::MatrixXd xc = data.rowwise() - data.colwise().mean();
  Eigen::VectorXd score;
  if (k.type == KernelType::linear) {
    // The centered linear kernel X Xᵀ shares its leading eigenvector with the
    // data SVD, so the n x n matrix is never formed.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);
    const double s = svd.singularValues()(0);
    if (s * s <= kEigenFloor)
      return Eigen::VectorXd::Zero(n);
    score = xc * svd.matrixV().col(0);
  } else {
    const double h = k.bandwidth > 0.0 ? k.bandwidth : median_pairwise_distance(data);
    if (!(h > 0.0))
      return Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd sq = xc.rowwise().squaredNorm();
    Eigen::MatrixXd km = xc * xc.transpose();
    km = ((-2.0 * km).colwise() + sq).rowwise() + sq.transpose();
    km = (-km.array().max(0.0) / (2.0 * h * h)).exp().matrix();
    const Eigen::VectorXd rmean = km.rowwise().mean();
    const double gmean = rmean.mean();
    km = (km.colwise() - rmean).rowwise() - rmean.transpose();
    km.array() += gmean;
    const auto [lambda, v] = leading_eigenpair(km);
    if (lambda <= kEigenFloor)
      return Eigen::VectorXd::Zero(n);
    score = std::sqrt(lambda) * v;
  }
  const Eigen::VectorXd c0 = xc.col(0);
  if (score.dot(c0) < 0.0)
    score = -score;
  return score;
}

// ---------------------------------------------------------------------------
// t-copula mixture

void validate(const MixtureParams& m)
{
  if (!(m.pi >= 0.0 && m.pi <= 1.0))
    throw DomainError("mixture: pi must lie in [0, 1]");
  if (!(std::abs(m.rho1) < 1.0 && std::abs(m.rho2) < 1.0))
    throw DomainError("mixture: correlations must lie in (-1, 1)");
  if (!(m.nu1 > 2.0 && m.nu2 > 2.0))
    throw DomainError("mixture: degrees of freedom must exceed 2");
}

namespace {

double log_sum_exp(double a, double b)
{
  if (a == -std::numeric_limits<double>::infinity())
    return b;
  if (b == -std::numeric_limits<double>::infinity())
    return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double weighted_log(double w, double log_value)
{
  return w > 0.0 ? std::log(w) + log_value : -std::numeric_limits<double>::infinity();
}

// t quantiles of the data at one nu, with the rho-free part of the log
// copula density.
struct TScores {
  double nu = 0.0;
  Eigen::ArrayXd x, y, xx, yy, xy, marginal;
  double constant = 0.0;
};

TScores t_scores(const Eigen::MatrixXd& u, double nu)
{
  TScores s;
  s.nu = nu;
  const Eigen::Index n = u.rows();
  s.x.resize(n);
  s.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.x(i) = dist::t_quantile(u(i, 0), nu);
    s.y(i) = dist::t_quantile(u(i, 1), nu);
  }
  s.xx = s.x.square();
  s.yy = s.y.square();
  s.xy = s.x * s.y;
  s.marginal = 0.5 * (nu + 1.0) * ((s.xx / nu).log1p() + (s.yy / nu).log1p());
  s.constant = std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) -
               2.0 * std::lgamma(0.5 * (nu + 1.0));
  return s;
}

Eigen::ArrayXd t_log_density(const TScores& s, double rho)
{
  const double om = 1.0 - rho * rho;
  const Eigen::ArrayXd q = (s.xx + s.yy - 2.0 * rho * s.xy) / (s.nu * om);
  return s.constant - 0.5 * std::log(om) - 0.5 * (s.nu + 2.0) * q.log1p() + s.marginal;
}

double weighted_t_loglik(const TScores& s, double rho, const Eigen::ArrayXd& w)
{
  return (w * t_log_density(s, rho)).sum();
}

constexpr double kRhoMax = 0.995;

// Weighted MLE of rho at fixed nu.
std::pair<double, double> best_rho(const TScores& s, const Eigen::ArrayXd& w)
{
  const auto [r, negll] = brent_minimize(
      [&](double rho) { return -weighted_t_loglik(s, rho, w); }, -kRhoMax, kRhoMax, 40, 200);
  return {r, -negll};
}

struct Component {
  double rho = 0.0;
  double nu = 4.0;
};

class ScoreCache {
public:
  explicit ScoreCache(const Eigen::MatrixXd& u) : u_(u) {}
  const TScores& at(double nu)
  {
    for (const auto& s : cache_)
      if (s.nu == nu)
        return s;
    cache_.push_back(t_scores(u_, nu));
    return cache_.back();
  }

private:
  const Eigen::MatrixXd& u_;
  std::deque<TScores> cache_;
};

double component_q(ScoreCache& cache, const Component& c, const Eigen::ArrayXd& w)
{
  return weighted_t_loglik(cache.at(c.nu), c.rho, w);
}

// Profile over the given nu values; only moves when the weighted
// log-likelihood improves (generalized EM step).
Component m_step(ScoreCache& cache, const Component& current, const std::vector<double>& nus,
                 const Eigen::ArrayXd& w, bool have_current)
{
  Component best = current;
  double best_q = have_current ? component_q(cache, current, w)
                               : -std::numeric_limits<double>::infinity();
  for (double nu : nus) {
    const auto [rho, q] = best_rho(cache.at(nu), w);
    if (q > best_q) {
      best_q = q;
      best = {rho, nu};
    }
  }
  return best;
}

std::vector<double> neighbours(const std::vector<double>& grid, double nu)
{
  std::vector<double> out;
  const auto it = std::find(grid.begin(), grid.end(), nu);
  if (it == grid.end())
    return grid;
  const auto i = static_cast<std::size_t>(it - grid.begin());
  if (i > 0)
    out.push_back(grid[i - 1]);
  out.push_back(grid[i]);
  if (i + 1 < grid.size())
    out.push_back(grid[i + 1]);
  return out;
}

Component refine_nu(const Eigen::MatrixXd& u, const Component& c, const std::vector<double>& grid,
                    const Eigen::ArrayXd& w)
{
  auto lo_it = std::find(grid.begin(), grid.end(), c.nu);
  if (lo_it == grid.end())
    return c;
  const auto i = static_cast<std::size_t>(lo_it - grid.begin());
  const double lo = i > 0 ? grid[i - 1] : std::max(2.05, 0.5 * (2.0 + grid[i]));
  const double hi = i + 1 < grid.size() ? grid[i + 1] : 2.0 * grid[i];
  Component best = c;
  double best_q = weighted_t_loglik(t_scores(u, c.nu), c.rho, w);
  const auto [lnu, negq] = brent_minimize(
      [&](double lognu) {
        const auto s = t_scores(u, std::exp(lognu));
        return -best_rho(s, w).second;
      },
      std::log(lo), std::log(hi), 20, 40);
  const double nu = std::exp(lnu);
  if (-negq > best_q) {
    const auto s = t_scores(u, nu);
    best = {best_rho(s, w).first, nu};
    best_q = -negq;
  }
  return best;
}

struct EStep {
  double loglik = 0.0;
  Eigen::ArrayXd r1;
};

EStep e_step(const Eigen::ArrayXd& l1, const Eigen::ArrayXd& l2, double pi, std::size_t workers)
{
  const Eigen::Index n = l1.size();
  EStep e;
  e.r1.resize(n);
  std::vector<double> ll(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    const double a = weighted_log(pi, l1(static_cast<Eigen::Index>(i)));
    const double b = weighted_log(1.0 - pi, l2(static_cast<Eigen::Index>(i)));
    const double tot = log_sum_exp(a, b);
    ll[i] = tot;
    e.r1(static_cast<Eigen::Index>(i)) = std::exp(a - tot);
  });
  double s = 0.0;
  for (double v : ll)
    s += v;
  e.loglik = s;
  return e;
}

void check_pairs(const Eigen::MatrixXd& u, std::size_t min_rows)
{
  if (u.cols() != 2)
    throw DomainError("mixture: data must have two columns");
  if (static_cast<std::size_t>(u.rows()) < min_rows)
    throw FitError("mixture fit needs at least " + std::to_string(min_rows) + " pairs");
  if (!((u.array() > 0.0).all() && (u.array() < 1.0).all()))
    throw DomainError("mixture: pairs must lie in the open unit square");
}

} // namespace

double mixture_log_density(double u, double v, const MixtureParams& m)
{
  validate(m);
  const double l1 = bicop_log_density(u, v, BivariateCopula::student_t(m.rho1, m.nu1));
  const double l2 = bicop_log_density(u, v, BivariateCopula::student_t(m.rho2, m.nu2));
  return log_sum_exp(weighted_log(m.pi, l1), weighted_log(1.0 - m.pi, l2));
}

double mixture_loglik(const Eigen::MatrixXd& u, const MixtureParams& m)
{
  check_pairs(u, 1);
  validate(m);
  const Eigen::ArrayXd l1 = t_log_density(t_scores(u, m.nu1), m.rho1);
  const Eigen::ArrayXd l2 = t_log_density(t_scores(u, m.nu2), m.rho2);
  return e_step(l1, l2, m.pi, 1).loglik;
}

MixtureFit fit_tcop_mixture(const Eigen::MatrixXd& u, const MixtureFitOptions& opts)
{
  check_pairs(u, 200);
  if (opts.nu_grid.empty() ||
      std::any_of(opts.nu_grid.begin(), opts.nu_grid.end(), [](double v) { return !(v > 2.0); }))
    throw DomainError("mixture: nu grid must be non-empty with values above 2");
  std::vector<double> grid = opts.nu_grid;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const std::size_t workers = resolve_workers(opts.workers);
  const Eigen::Index n = u.rows();
  ScoreCache cache(u);

  auto check_weight = [&](double pi) {
    if (!(pi >= opts.min_weight && pi <= 1.0 - opts.min_weight))
      throw DegenerateMixtureError("mixture collapsed to a single component (pi = " +
                                   std::to_string(pi) + ")");
  };

  // Concordant points start in component 1, discordant ones in component 2.
  Eigen::ArrayXd r1(n);
  for (Eigen::Index i = 0; i < n; ++i)
    r1(i) = dist::normal_quantile(u(i, 0)) * dist::normal_quantile(u(i, 1)) > 0.0 ? 1.0 : 0.0;
  double pi = r1.mean();
  check_weight(pi);
  Component c1 = m_step(cache, {}, grid, r1, false);
  Component c2 = m_step(cache, {}, grid, 1.0 - r1, false);

  MixtureFit fit;
  auto run_e = [&]() {
    const Eigen::ArrayXd l1 = t_log_density(cache.at(c1.nu), c1.rho);
    const Eigen::ArrayXd l2 = t_log_density(cache.at(c2.nu), c2.rho);
    return e_step(l1, l2, pi, workers);
  };
  auto record = [&](double ll) {
    if (!fit.trace.empty() && ll < fit.trace.back() - 1e-9 * (1.0 + std::abs(fit.trace.back())))
      throw FitError("EM log-likelihood decreased");
    fit.trace.push_back(ll);
  };

  auto e = run_e();
  record(e.loglik);
  for (int it = 0; it < opts.max_iterations; ++it) {
    pi = e.r1.mean();
    check_weight(pi);
    c1 = m_step(cache, c1, neighbours(grid, c1.nu), e.r1, true);
    c2 = m_step(cache, c2, neighbours(grid, c2.nu), 1.0 - e.r1, true);
    e = run_e();
    record(e.loglik);
    ++fit.iterations;
    const double gain = fit.trace.back() - fit.trace[fit.trace.size() - 2];
    if (gain < opts.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (opts.refine_nu) {
    c1 = refine_nu(u, c1, grid, e.r1);
    c2 = refine_nu(u, c2, grid, 1.0 - e.r1);
    e = run_e();
    record(e.loglik);
  }

  fit.loglik = fit.trace.back();
  fit.params = {pi, c1.rho, c2.rho, c1.nu, c2.nu};
  fit.near_boundary = std::min(pi, 1.0 - pi) < opts.boundary_weight;
  if (fit.params.rho1 < fit.params.rho2)
    fit.params = {1.0 - pi, c2.rho, c1.rho, c2.nu, c1.nu};
  return fit;
}

ClusterAssignment assign_clusters(const Eigen::MatrixXd& u, const MixtureParams& m,
                                  std::size_t workers)
{
  check_pairs(u, 1);
  validate(m);
  const Eigen::ArrayXd l1 = t_log_density(t_scores(u, m.nu1), m.rho1);
  const Eigen::ArrayXd l2 = t_log_density(t_scores(u, m.nu2), m.rho2);
  const auto e = e_step(l1, l2, m.pi, resolve_workers(workers));
  ClusterAssignment a;
  a.posterior.resize(u.rows(), 2);
  a.posterior.col(0) = e.r1.matrix();
  a.posterior.col(1) = (1.0 - e.r1).matrix();
  a.labels.resize(static_cast<std::size_t>(u.rows()));
  for (Eigen::Index i = 0; i < u.rows(); ++i)
    a.labels[i] = a.posterior(i, 0) >= a.posterior(i, 1) ? 1 : 2;
  return a;
}

void write_assignment_csv(std::ostream& os, const ClusterAssignment& a)
{
  os << "row,posterior1,posterior2,label\n";
  const auto old = os.precision(17);
  for (Eigen::Index i = 0; i < a.posterior.rows(); ++i)
    os << i << ',' << a.posterior(i, 0) << ',' << a.posterior(i, 1) << ',' << a.labels[i] << '\n';
  os.precision(old);
}

Eigen::MatrixXd simulate_tcop_mixture(const MixtureParams& m, std::size_t n, std::mt19937_64& rng,
                                      std::vector<int>* labels)
{
  validate(m);
  const auto c1 = BivariateCopula::student_t(m.rho1, m.nu1);
  const auto c2 = BivariateCopula::student_t(m.rho2, m.nu2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd out(n, 2);
  if (labels)
    labels->assign(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const bool first = unif(rng) < m.pi;
    out.row(static_cast<Eigen::Index>(i)) = bicop_simulate(first ? c1 : c2, 1, rng).row(0);
    if (labels)
      (*labels)[i] = first ? 1 : 2;
  }
  return out;
}

RegimeAnalysis cluster_regimes(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                               const KernelSpec& kernel, const MixtureFitOptions& opts)
{
  if (x.rows() != loss.size())
    throw DomainError("cluster_regimes: factor and loss lengths differ");
  RegimeAnalysis r;
  r.score = kernel_pca_first_component(x, kernel);
  const std::vector<double> s(r.score.data(), r.score.data() + r.score.size());
  const std::vector<double> l(loss.data(), loss.data() + loss.size());
  const auto us = pseudo_observations(s);
  const auto ul = pseudo_observations(l);
  r.u.resize(x.rows(), 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    r.u(i, 0) = us[i];
    r.u(i, 1) = ul[i];
  }
  r.fit = fit_tcop_mixture(r.u, opts);
  r.assignment = assign_clusters(r.u, r.fit.params, opts.workers);
  return r;
}

} // namespace vinestress

#pragma once

// Independent reference computations used by the test suites. Nothing here
// calls into the library implementation being checked.

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <algorithm>
#include <vector>

namespace oracle {

//! Adaptive Gauss-Kronrod integral of f over [a, b] (b may be +inf).
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-10)
{
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, tol);
}

//! Nested 1-d quadrature over the unit square.
inline double integrate_unit_square(const std::function<double(double, double)>& f,
                                    double tol = 1e-8)
{
  auto outer = [&](double u) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double v) { return f(u, v); }, 0.0, 1.0, 15, tol);
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(outer, 0.0, 1.0, 15, tol);
}

inline double t_density(double x, double nu)
{
  return std::exp(std::lgamma(0.5 * (nu + 1)) - std::lgamma(0.5 * nu)) /
         std::sqrt(nu * std::numbers::pi) * std::pow(1 + x * x / nu, -0.5 * (nu + 1));
}

inline double t_cdf(double x, double nu)
{
  return boost::math::cdf(boost::math::students_t(nu), x);
}

inline double t_quantile(double p, double nu)
{
  return boost::math::quantile(boost::math::students_t(nu), p);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x)
{
  return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi);
}

//! O(n^2) Kendall tau-b.
inline double kendall_tau_bruteforce(const std::vector<double>& x, const std::vector<double>& y)
{
  double conc = 0, disc = 0, tx = 0, ty = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0)
        continue;
      if (dx == 0) {
        tx += 1;
        continue;
      }
      if (dy == 0) {
        ty += 1;
        continue;
      }
      (dx * dy > 0 ? conc : disc) += 1;
    }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

//! Multivariate normal density with zero mean.
inline double mvn_density(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma)
{
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  const Eigen::VectorXd z = llt.matrixL().solve(x);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = static_cast<double>(x.size());
  return std::exp(-0.5 * z.squaredNorm() - 0.5 * logdet - 0.5 * d * std::log(2 * std::numbers::pi));
}

//! Bivariate t density (zero mean, scale matrix sigma).
inline double bvt_density(double x1, double x2, double s11, double s12, double s22, double nu)
{
  const double det = s11 * s22 - s12 * s12;
  const double q = (s22 * x1 * x1 - 2 * s12 * x1 * x2 + s11 * x2 * x2) / det;
  return 1.0 / (2 * std::numbers::pi * std::sqrt(det)) * std::pow(1 + q / nu, -0.5 * nu - 1);
}

//! Golden-section maximization of a unimodal function on [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-12)
{
  const double g = (std::sqrt(5.0) - 1) / 2;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1 + std::abs(a) + std::abs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

} // namespace oracle

namespace oracle {

//! Partial correlation of (a, b) given `cond` from a correlation matrix, via
//! the inverse of the relevant sub-matrix.
inline double partial_correlation(const Eigen::MatrixXd& sigma, int a, int b,
                                  const std::vector<int>& cond)
{
  std::vector<int> idx{a, b};
  idx.insert(idx.end(), cond.begin(), cond.end());
  const int m = static_cast<int>(idx.size());
  Eigen::MatrixXd sub(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      sub(i, j) = sigma(idx[i], idx[j]);
  const Eigen::MatrixXd p = sub.inverse();
  return -p(0, 1) / std::sqrt(p(0, 0) * p(1, 1));
}

//! Random correlation matrix (normalized Wishart-like draw).
inline Eigen::MatrixXd random_correlation(int d, std::mt19937_64& rng)
{
  std::normal_distribution<double> nd;
  Eigen::MatrixXd a(d, d + 2);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d + 2; ++j)
      a(i, j) = nd(rng);
  Eigen::MatrixXd s = a * a.transpose();
  const Eigen::VectorXd dinv = s.diagonal().array().rsqrt();
  return dinv.asDiagonal() * s * dinv.asDiagonal();
}

inline double normal_quantile(double p)
{
  // Acklam-style rational start refined by Newton on the erfc-based cdf.
  double x = 0.0;
  if (p < 0.5)
    x = -std::sqrt(-2.0 * std::log(p));
  else
    x = std::sqrt(-2.0 * std::log(1.0 - p));
  for (int i = 0; i < 100; ++i) {
    const double step = (normal_cdf(x) - p) / normal_pdf(x);
    x -= step;
    if (std::abs(step) < 1e-15 * (1 + std::abs(x)))
      break;
  }
  return x;
}

//! Kolmogorov-Smirnov statistic of a sample against a cdf.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf)
{
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

//! Asymptotic KS critical value at level 0.01.
inline double ks_critical_01(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

} // namespace oracle

#pragma once

// Scalar distribution helpers shared by the copula code.

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace vinestress::dist {

inline double normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_quantile(double p)
{
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

inline double normal_log_pdf(double x)
{
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double t_cdf(double x, double nu)
{
  return boost::math::cdf(boost::math::students_t(nu), x);
}

inline double t_quantile(double p, double nu)
{
  return boost::math::quantile(boost::math::students_t(nu), p);
}

inline double t_log_pdf(double x, double nu)
{
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

} // namespace vinestress::dist

#include "vinestress/bicop.hpp"

#include "dist.hpp"
#include "vinestress/errors.hpp"
#include "vinestress/optim.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/owens_t.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace vinestress {

namespace {

constexpr double kRhoMax = 0.9999;
constexpr double kNuMin = 2.1;
constexpr double kNuMax = 50.0;
constexpr double kClaytonMax = 28.0;
constexpr double kFrankMax = 35.0;
constexpr double kBb1ThetaMax = 7.0;
constexpr double kBb1DeltaMax = 7.0;
constexpr double kUnitEps = 1e-15;

double clamp_unit(double u)
{
  return std::clamp(u, kUnitEps, 1.0 - kUnitEps);
}

// ---------------------------------------------------------------------------
// Base (unrotated) families. All families here are exchangeable, so
// dC/dv (u, v) = h1(v, u) and only h1 and its inverse are needed.

double gauss_log_pdf(double u, double v, double rho)
{
  const double x = dist::normal_quantile(u), y = dist::normal_quantile(v);
  const double r2 = 1.0 - rho * rho;
  return -0.5 * std::log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2);
}

double gauss_h1(double u, double v, double rho)
{
  const double x = dist::normal_quantile(u), y = dist::normal_quantile(v);
  return dist::normal_cdf((y - rho * x) / std::sqrt(1.0 - rho * rho));
}

double gauss_hinv1(double p, double u, double rho)
{
  const double x = dist::normal_quantile(u);
  return dist::normal_cdf(dist::normal_quantile(p) * std::sqrt(1.0 - rho * rho) + rho * x);
}

// Bivariate standard normal cdf via Owen's T function.
double bvn_cdf(double h, double k, double rho)
{
  if (h == 0.0)
    h = 1e-300;
  if (k == 0.0)
    k = 1e-300;
  const double s = std::sqrt(1.0 - rho * rho);
  const double ah = (k - rho * h) / (h * s);
  const double ak = (h - rho * k) / (k * s);
  const double delta = (h * k > 0.0 || (h * k == 0.0 && h + k >= 0.0)) ? 0.0 : 0.5;
  return 0.5 * (dist::normal_cdf(h) + dist::normal_cdf(k)) - boost::math::owens_t(h, ah) -
         boost::math::owens_t(k, ak) - delta;
}

double gauss_cdf(double u, double v, double rho)
{
  return std::clamp(bvn_cdf(dist::normal_quantile(u), dist::normal_quantile(v), rho), 0.0, 1.0);
}

double t_log_pdf_scores(double x, double y, double rho, double nu)
{
  const double r2 = 1.0 - rho * rho;
  const double q = (x * x + y * y - 2.0 * rho * x * y) / (nu * r2);
  const double log_t2 = std::lgamma(0.5 * (nu + 2.0)) - std::lgamma(0.5 * nu) -
                        std::log(nu * std::numbers::pi) - 0.5 * std::log(r2) -
                        0.5 * (nu + 2.0) * std::log1p(q);
  return log_t2 - dist::t_log_pdf(x, nu) - dist::t_log_pdf(y, nu);
}

double t_log_pdf(double u, double v, double rho, double nu)
{
  return t_log_pdf_scores(dist::t_quantile(u, nu), dist::t_quantile(v, nu), rho, nu);
}

double t_h1(double u, double v, double rho, double nu)
{
  const double x = dist::t_quantile(u, nu), y = dist::t_quantile(v, nu);
  const double scale = std::sqrt((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0));
  return dist::t_cdf((y - rho * x) / scale, nu + 1.0);
}

double t_hinv1(double p, double u, double rho, double nu)
{
  const double x = dist::t_quantile(u, nu);
  const double scale = std::sqrt((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0));
  return dist::t_cdf(rho * x + dist::t_quantile(p, nu + 1.0) * scale, nu);
}

// Bivariate t cdf as a normal scale mixture: E[Phi2(x sqrt(S/nu), y sqrt(S/nu))]
// with S ~ chi^2_nu.
double t_cdf(double u, double v, double rho, double nu)
{
  const double x = dist::t_quantile(u, nu), y = dist::t_quantile(v, nu);
  const double k = 0.5 * nu;
  const double log_norm = -std::lgamma(k) - k * std::numbers::ln2;
  auto integrand = [&](double s) {
    if (s <= 0.0)
      return 0.0;
    const double dens = std::exp(log_norm + (k - 1.0) * std::log(s) - 0.5 * s);
    const double r = std::sqrt(s / nu);
    return dens * bvn_cdf(x * r, y * r, rho);
  };
  const double val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-14);
  return std::clamp(val, 0.0, 1.0);
}

// Clayton ------------------------------------------------------------------

double clayton_log_pdf(double u, double v, double d)
{
  const double lu = std::log(u), lv = std::log(v);
  const double a = std::exp(-d * lu) + std::exp(-d * lv) - 1.0;
  return std::log1p(d) - (1.0 + d) * (lu + lv) - (2.0 + 1.0 / d) * std::log(a);
}

double clayton_h1(double u, double v, double d)
{
  const double lu = std::log(u);
  const double a = std::exp(-d * lu) + std::exp(-d * std::log(v)) - 1.0;
  return std::exp((-d - 1.0) * lu - (1.0 + 1.0 / d) * std::log(a));
}

double clayton_hinv1(double p, double u, double d)
{
  const double lu = std::log(u);
  const double t = std::exp(-d / (d + 1.0) * (std::log(p) + (d + 1.0) * lu));
  const double a = t + 1.0 - std::exp(-d * lu);
  return std::exp(-std::log(a) / d);
}

double clayton_cdf(double u, double v, double d)
{
  const double a = std::pow(u, -d) + std::pow(v, -d) - 1.0;
  return std::pow(a, -1.0 / d);
}

// Frank --------------------------------------------------------------------

double frank_log_pdf(double u, double v, double d)
{
  if (std::abs(d) < 1e-10)
    return 0.0;
  const double em = std::expm1(-d);
  const double den = em + std::expm1(-d * u) * std::expm1(-d * v);
  return std::log(std::abs(d * em)) - d * (u + v) - 2.0 * std::log(std::abs(den));
}

double frank_h1(double u, double v, double d)
{
  if (std::abs(d) < 1e-10)
    return v;
  const double num = std::exp(-d * u) * std::expm1(-d * v);
  const double den = std::expm1(-d) + std::expm1(-d * u) * std::expm1(-d * v);
  return num / den;
}

double frank_hinv1(double p, double u, double d)
{
  if (std::abs(d) < 1e-10)
    return p;
  const double a = std::exp(-d * u);
  const double b = p * std::expm1(-d) / (p + a * (1.0 - p));
  return -std::log1p(b) / d;
}

double frank_cdf(double u, double v, double d)
{
  if (std::abs(d) < 1e-10)
    return u * v;
  return -std::log1p(std::expm1(-d * u) * std::expm1(-d * v) / std::expm1(-d)) / d;
}

// BB1 ----------------------------------------------------------------------

struct Bb1Terms {
  double log_s;
  double w;
  double log_a;
};

Bb1Terms bb1_terms(double u, double v, double th, double de, bool need_a = true)
{
  const double gu = std::expm1(-th * std::log(u));
  const double gv = std::expm1(-th * std::log(v));
  const double lx = de * std::log(gu), ly = de * std::log(gv);
  const double m = std::max(lx, ly);
  const double log_s = m + std::log(std::exp(lx - m) + std::exp(ly - m));
  const double w = std::exp(log_s / de);
  const double log_a = need_a ? (de - 1.0) * std::log(gu) + (-th - 1.0) * std::log(u) : 0.0;
  return {log_s, w, log_a};
}

double bb1_log_pdf(double u, double v, double th, double de)
{
  const auto tu = bb1_terms(u, v, th, de);
  const double gv = std::expm1(-th * std::log(v));
  const double log_b = (de - 1.0) * std::log(gv) + (-th - 1.0) * std::log(v);
  return tu.log_a + log_b + (-1.0 / th - 2.0) * std::log1p(tu.w) +
         (1.0 / de - 2.0) * tu.log_s + std::log(th * (de - 1.0) + (th * de + 1.0) * tu.w);
}

double bb1_h1(double u, double v, double th, double de)
{
  const auto t = bb1_terms(u, v, th, de);
  return std::exp((-1.0 / th - 1.0) * std::log1p(t.w) + (1.0 / de - 1.0) * t.log_s + t.log_a);
}

double bb1_cdf(double u, double v, double th, double de)
{
  const auto t = bb1_terms(u, v, th, de, false);
  return std::exp(-std::log1p(t.w) / th);
}

// Generic inversion of a monotone h-function in its second argument,
// solved on the logit scale.
template <class H>
double invert_h1(H h1, double p, double u)
{
  auto f = [&](double z) { return h1(u, 1.0 / (1.0 + std::exp(-z))) - p; };
  double lo = -40.0, hi = 40.0;
  if (f(lo) >= 0.0)
    return 1.0 / (1.0 + std::exp(-lo));
  if (f(hi) <= 0.0)
    return 1.0 / (1.0 + std::exp(-hi));
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 1.0 / (1.0 + std::exp(-0.5 * (a + b)));
}

// ---------------------------------------------------------------------------
// Dispatch on family (rotation 0)

double base_log_pdf(double u, double v, const BivariateCopula& c)
{
  switch (c.family) {
  case Family::independence:
    return 0.0;
  case Family::gaussian:
    return gauss_log_pdf(u, v, c.par[0]);
  case Family::student_t:
    return t_log_pdf(u, v, c.par[0], c.par[1]);
  case Family::clayton:
    return clayton_log_pdf(u, v, c.par[0]);
  case Family::frank:
    return frank_log_pdf(u, v, c.par[0]);
  case Family::bb1:
    return bb1_log_pdf(u, v, c.par[0], c.par[1]);
  }
  return 0.0;
}

double base_h1(double u, double v, const BivariateCopula& c)
{
  switch (c.family) {
  case Family::independence:
    return v;
  case Family::gaussian:
    return gauss_h1(u, v, c.par[0]);
  case Family::student_t:
    return t_h1(u, v, c.par[0], c.par[1]);
  case Family::clayton:
    return clayton_h1(u, v, c.par[0]);
  case Family::frank:
    return frank_h1(u, v, c.par[0]);
  case Family::bb1:
    return bb1_h1(u, v, c.par[0], c.par[1]);
  }
  return v;
}

double base_hinv1(double p, double u, const BivariateCopula& c)
{
  switch (c.family) {
  case Family::independence:
    return p;
  case Family::gaussian:
    return gauss_hinv1(p, u, c.par[0]);
  case Family::student_t:
    return t_hinv1(p, u, c.par[0], c.par[1]);
  case Family::clayton:
    return clayton_hinv1(p, u, c.par[0]);
  case Family::frank:
    return frank_hinv1(p, u, c.par[0]);
  case Family::bb1: {
    const double th = c.par[0], de = c.par[1];
    return invert_h1([&](double a, double b) { return bb1_h1(a, b, th, de); }, p, u);
  }
  }
  return p;
}

double base_cdf(double u, double v, const BivariateCopula& c)
{
  switch (c.family) {
  case Family::independence:
    return u * v;
  case Family::gaussian:
    return gauss_cdf(u, v, c.par[0]);
  case Family::student_t:
    return t_cdf(u, v, c.par[0], c.par[1]);
  case Family::clayton:
    return clayton_cdf(u, v, c.par[0]);
  case Family::frank:
    return frank_cdf(u, v, c.par[0]);
  case Family::bb1:
    return bb1_cdf(u, v, c.par[0], c.par[1]);
  }
  return u * v;
}

double debye1(double x)
{
  // (1/x) * int_0^x t / (e^t - 1) dt, 64-point Gauss-Legendre
  if (std::abs(x) < 1e-10)
    return 1.0 - x / 4.0;
  auto f = [](double t) { return std::abs(t) < 1e-12 ? 1.0 : t / std::expm1(t); };
  const double integral = x > 0.0
                              ? boost::math::quadrature::gauss<double, 64>::integrate(f, 0.0, x)
                              : -boost::math::quadrature::gauss<double, 64>::integrate(f, x, 0.0);
  return integral / x;
}

double base_tau(const BivariateCopula& c)
{
  switch (c.family) {
  case Family::independence:
    return 0.0;
  case Family::gaussian:
  case Family::student_t:
    return 2.0 / std::numbers::pi * std::asin(c.par[0]);
  case Family::clayton:
    return c.par[0] / (c.par[0] + 2.0);
  case Family::frank: {
    const double d = c.par[0];
    if (std::abs(d) < 1e-8)
      return d / 9.0;
    return 1.0 - 4.0 / d + 4.0 * debye1(d) / d;
  }
  case Family::bb1:
    return 1.0 - 2.0 / (c.par[1] * (c.par[0] + 2.0));
  }
  return 0.0;
}

} // namespace

// ---------------------------------------------------------------------------

std::string to_string(Family f)
{
  switch (f) {
  case Family::independence:
    return "independence";
  case Family::gaussian:
    return "gaussian";
  case Family::student_t:
    return "student_t";
  case Family::clayton:
    return "clayton";
  case Family::frank:
    return "frank";
  case Family::bb1:
    return "bb1";
  }
  return "unknown";
}

Family family_from_string(const std::string& name)
{
  for (auto f : {Family::independence, Family::gaussian, Family::student_t, Family::clayton,
                 Family::frank, Family::bb1})
    if (to_string(f) == name)
      return f;
  if (name == "t")
    return Family::student_t;
  if (name == "indep" || name == "I")
    return Family::independence;
  throw InputError("unknown copula family '" + name + "'");
}

int parameter_count(Family f)
{
  switch (f) {
  case Family::independence:
    return 0;
  case Family::student_t:
  case Family::bb1:
    return 2;
  default:
    return 1;
  }
}

bool is_rotatable(Family f)
{
  return f == Family::clayton || f == Family::bb1;
}

std::string BivariateCopula::str() const
{
  std::ostringstream os;
  os.precision(4);
  switch (family) {
  case Family::independence:
    os << "I(0)";
    break;
  case Family::gaussian:
    os << "N(" << par[0] << ")";
    break;
  case Family::student_t:
    os << "t(" << par[0] << ", " << par[1] << ")";
    break;
  case Family::clayton:
    os << "C(" << par[0] << ")";
    break;
  case Family::frank:
    os << "F(" << par[0] << ")";
    break;
  case Family::bb1:
    os << "BB1(" << par[0] << ", " << par[1] << ")";
    break;
  }
  if (rotation != 0)
    os << "@" << rotation;
  return os.str();
}

void validate(const BivariateCopula& c)
{
  if (c.rotation != 0 && c.rotation != 90 && c.rotation != 180 && c.rotation != 270)
    throw DomainError("copula rotation must be 0, 90, 180 or 270");
  if (c.rotation != 0 && !is_rotatable(c.family))
    throw DomainError("rotations are only defined for clayton and bb1");
  const double a = c.par[0], b = c.par[1];
  bool ok = true;
  switch (c.family) {
  case Family::independence:
    break;
  case Family::gaussian:
    ok = std::abs(a) < 1.0;
    break;
  case Family::student_t:
    ok = std::abs(a) < 1.0 && b > 2.0 && std::isfinite(b);
    break;
  case Family::clayton:
    ok = a > 0.0 && std::isfinite(a);
    break;
  case Family::frank:
    ok = a != 0.0 && std::isfinite(a);
    break;
  case Family::bb1:
    ok = a > 0.0 && b >= 1.0 && std::isfinite(a) && std::isfinite(b);
    break;
  }
  if (!ok)
    throw DomainError("parameters outside the domain of the " + to_string(c.family) +
                      " copula");
}

double bicop_log_density(double u, double v, const BivariateCopula& c)
{
  u = clamp_unit(u);
  v = clamp_unit(v);
  switch (c.rotation) {
  case 90:
    return base_log_pdf(1.0 - u, v, c);
  case 180:
    return base_log_pdf(1.0 - u, 1.0 - v, c);
  case 270:
    return base_log_pdf(u, 1.0 - v, c);
  default:
    return base_log_pdf(u, v, c);
  }
}

double bicop_density(double u, double v, const BivariateCopula& c)
{
  validate(c);
  if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0))
    throw DomainError("bicop_density: arguments must lie in (0, 1)");
  return std::exp(bicop_log_density(u, v, c));
}

double bicop_cdf(double u, double v, const BivariateCopula& c)
{
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  if (u == 0.0 || v == 0.0)
    return 0.0;
  if (u == 1.0)
    return v;
  if (v == 1.0)
    return u;
  switch (c.rotation) {
  case 90:
    return v - base_cdf(1.0 - u, v, c);
  case 180:
    return u + v - 1.0 + base_cdf(1.0 - u, 1.0 - v, c);
  case 270:
    return u - base_cdf(u, 1.0 - v, c);
  default:
    return base_cdf(u, v, c);
  }
}

double bicop_hfunc1(double u, double v, const BivariateCopula& c)
{
  u = clamp_unit(u);
  v = clamp_unit(v);
  double h;
  switch (c.rotation) {
  case 90:
    h = base_h1(1.0 - u, v, c);
    break;
  case 180:
    h = 1.0 - base_h1(1.0 - u, 1.0 - v, c);
    break;
  case 270:
    h = 1.0 - base_h1(u, 1.0 - v, c);
    break;
  default:
    h = base_h1(u, v, c);
  }
  return std::clamp(h, 0.0, 1.0);
}

double bicop_hfunc2(double u, double v, const BivariateCopula& c)
{
  u = clamp_unit(u);
  v = clamp_unit(v);
  double h;
  switch (c.rotation) {
  case 90:
    h = 1.0 - base_h1(v, 1.0 - u, c);
    break;
  case 180:
    h = 1.0 - base_h1(1.0 - v, 1.0 - u, c);
    break;
  case 270:
    h = base_h1(1.0 - v, u, c);
    break;
  default:
    h = base_h1(v, u, c);
  }
  return std::clamp(h, 0.0, 1.0);
}

double bicop_hfunc(double u, double v, const BivariateCopula& c, int direction)
{
  validate(c);
  if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0))
    throw DomainError("bicop_hfunc: arguments must lie in (0, 1)");
  if (direction == 1)
    return bicop_hfunc1(u, v, c);
  if (direction == 2)
    return bicop_hfunc2(u, v, c);
  throw DomainError("bicop_hfunc: direction must be 1 or 2");
}

double bicop_hinv1(double p, double u, const BivariateCopula& c)
{
  p = clamp_unit(p);
  u = clamp_unit(u);
  double v;
  switch (c.rotation) {
  case 90:
    v = base_hinv1(p, 1.0 - u, c);
    break;
  case 180:
    v = 1.0 - base_hinv1(1.0 - p, 1.0 - u, c);
    break;
  case 270:
    v = 1.0 - base_hinv1(1.0 - p, u, c);
    break;
  default:
    v = base_hinv1(p, u, c);
  }
  return std::clamp(v, 0.0, 1.0);
}

double bicop_hinv2(double p, double v, const BivariateCopula& c)
{
  p = clamp_unit(p);
  v = clamp_unit(v);
  double u;
  switch (c.rotation) {
  case 90:
    u = 1.0 - base_hinv1(1.0 - p, v, c);
    break;
  case 180:
    u = 1.0 - base_hinv1(1.0 - p, 1.0 - v, c);
    break;
  case 270:
    u = base_hinv1(p, 1.0 - v, c);
    break;
  default:
    u = base_hinv1(p, v, c);
  }
  return std::clamp(u, 0.0, 1.0);
}

PairValues bicop_evaluate(double u, double v, const BivariateCopula& c)
{
  u = clamp_unit(u);
  v = clamp_unit(v);
  PairValues out;
  if (c.family == Family::independence) {
    out.h1 = v;
    out.h2 = u;
    return out;
  }
  if (c.family == Family::student_t) {
    const double rho = c.par[0], nu = c.par[1];
    const double x = dist::t_quantile(u, nu), y = dist::t_quantile(v, nu);
    const double r2 = 1.0 - rho * rho;
    out.log_density = t_log_pdf_scores(x, y, rho, nu);
    out.h1 = dist::t_cdf((y - rho * x) / std::sqrt((nu + x * x) * r2 / (nu + 1.0)), nu + 1.0);
    out.h2 = dist::t_cdf((x - rho * y) / std::sqrt((nu + y * y) * r2 / (nu + 1.0)), nu + 1.0);
    return out;
  }
  if (c.family == Family::gaussian) {
    const double rho = c.par[0];
    const double x = dist::normal_quantile(u), y = dist::normal_quantile(v);
    const double r2 = 1.0 - rho * rho, s = std::sqrt(r2);
    out.log_density =
        -0.5 * std::log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2);
    out.h1 = dist::normal_cdf((y - rho * x) / s);
    out.h2 = dist::normal_cdf((x - rho * y) / s);
    return out;
  }
  out.log_density = bicop_log_density(u, v, c);
  out.h1 = bicop_hfunc1(u, v, c);
  out.h2 = bicop_hfunc2(u, v, c);
  return out;
}

double bicop_tau(const BivariateCopula& c)
{
  const double t = base_tau(c);
  return (c.rotation == 90 || c.rotation == 270) ? -t : t;
}

double tau_to_parameter(Family f, double tau)
{
  switch (f) {
  case Family::independence:
    return 0.0;
  case Family::gaussian:
  case Family::student_t:
    return std::sin(std::numbers::pi * tau / 2.0);
  case Family::clayton:
    if (!(tau > 0.0 && tau < 1.0))
      throw DomainError("clayton tau inversion needs tau in (0, 1)");
    return 2.0 * tau / (1.0 - tau);
  case Family::frank: {
    if (std::abs(tau) < 1e-12)
      return tau * 9.0;
    const double target = std::abs(tau);
    auto f = [&](double d) { return base_tau(BivariateCopula::frank(d)) - target; };
    if (f(kFrankMax) <= 0.0)
      return std::copysign(kFrankMax, tau);
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(
        f, 1e-9, kFrankMax, boost::math::tools::eps_tolerance<double>(52), iters);
    return std::copysign(0.5 * (a + b), tau);
  }
  case Family::bb1:
    throw DomainError("bb1 has two parameters; tau inversion is not unique");
  }
  return 0.0;
}

Eigen::MatrixXd bicop_simulate(const BivariateCopula& c, std::size_t n, std::mt19937_64& rng)
{
  validate(c);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double u = clamp_unit(unif(rng));
    const double p = clamp_unit(unif(rng));
    out(i, 0) = u;
    out(i, 1) = bicop_hinv1(p, u, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

double bicop_loglik(std::span<const double> u, std::span<const double> v,
                    const BivariateCopula& c)
{
  if (c.family == Family::independence)
    return 0.0;
  double ll = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    ll += bicop_log_density(u[i], v[i], c);
  return ll;
}

double information_criterion(const BivariateCopula& c, Criterion crit)
{
  const double k = parameter_count(c.family);
  const double n = static_cast<double>(c.nobs);
  const double penalty = crit == Criterion::aic ? 2.0 * k : k * std::log(std::max(n, 1.0));
  return -2.0 * c.loglik + penalty;
}

namespace {

void check_pairs(std::span<const double> u, std::span<const double> v)
{
  if (u.size() != v.size())
    throw FitError("fit_bicop: columns differ in length");
  if (u.size() < 30)
    throw FitError("fit_bicop: need at least 30 pairs");
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!(u[i] > 0.0 && u[i] < 1.0 && v[i] > 0.0 && v[i] < 1.0))
      throw FitError("fit_bicop: pseudo-observations must lie in (0, 1)");
  auto constant = [](std::span<const double> x) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return *hi - *lo <= 0.0;
  };
  if (constant(u) || constant(v))
    throw FitError("fit_bicop: constant column");
}

// Data in the orientation of the base family.
void unrotate(std::span<const double> u, std::span<const double> v, int rotation,
              std::vector<double>& bu, std::vector<double>& bv)
{
  bu.resize(u.size());
  bv.resize(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const bool flip_u = rotation == 90 || rotation == 180;
    const bool flip_v = rotation == 180 || rotation == 270;
    bu[i] = flip_u ? 1.0 - u[i] : u[i];
    bv[i] = flip_v ? 1.0 - v[i] : v[i];
  }
}

double t_profile_rho(const std::vector<double>& x, const std::vector<double>& y, double nu,
                     double rho_start, double& best_rho)
{
  auto nll = [&](double rho) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      s -= t_log_pdf_scores(x[i], y[i], rho, nu);
    return s;
  };
  auto [rho, val] = brent_minimize(nll, -kRhoMax, kRhoMax, 40);
  const double v0 = nll(rho_start);
  if (v0 < val) {
    rho = rho_start;
    val = v0;
  }
  best_rho = rho;
  return val;
}

BivariateCopula fit_student_t(std::span<const double> u, std::span<const double> v, double tau)
{
  const double rho0 = std::clamp(tau_to_parameter(Family::student_t, tau), -kRhoMax, kRhoMax);
  std::vector<double> x(u.size()), y(v.size());
  auto scores = [&](double nu) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      x[i] = dist::t_quantile(u[i], nu);
      y[i] = dist::t_quantile(v[i], nu);
    }
  };
  static const double grid[] = {2.1, 2.5, 3.0, 4.0, 5.0, 6.5, 8.5, 11.0, 15.0, 21.0, 30.0, 50.0};
  constexpr int grid_size = sizeof(grid) / sizeof(grid[0]);
  double best_val = std::numeric_limits<double>::infinity(), best_rho = rho0;
  int best_k = 0;
  for (int k = 0; k < grid_size; ++k) {
    scores(grid[k]);
    double rho;
    const double val = t_profile_rho(x, y, grid[k], rho0, rho);
    if (val < best_val) {
      best_val = val;
      best_rho = rho;
      best_k = k;
    }
  }
  double best_nu = grid[best_k];
  // polish nu on the log scale between the neighbouring grid points
  const double lo = std::log(grid[std::max(0, best_k - 1)]);
  const double hi = std::log(grid[std::min(grid_size - 1, best_k + 1)]);
  auto profile = [&](double lnu) {
    const double nu = std::exp(lnu);
    scores(nu);
    double rho;
    return t_profile_rho(x, y, nu, best_rho, rho);
  };
  auto [lnu, val] = brent_minimize(profile, lo, hi, 20, 25);
  if (val < best_val) {
    best_nu = std::exp(lnu);
    scores(best_nu);
    t_profile_rho(x, y, best_nu, best_rho, best_rho);
  }
  return BivariateCopula::student_t(best_rho, best_nu);
}

BivariateCopula fit_base(std::span<const double> u, std::span<const double> v, Family family,
                         double tau)
{
  auto nll_of = [&](const BivariateCopula& c) { return -bicop_loglik(u, v, c); };
  switch (family) {
  case Family::independence:
    return BivariateCopula::independence();
  case Family::gaussian: {
    std::vector<double> x(u.size()), y(v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      x[i] = dist::normal_quantile(u[i]);
      y[i] = dist::normal_quantile(v[i]);
    }
    auto nll = [&](double rho) {
      const double r2 = 1.0 - rho * rho;
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        s += 0.5 * std::log(r2) +
             (rho * rho * (x[i] * x[i] + y[i] * y[i]) - 2.0 * rho * x[i] * y[i]) / (2.0 * r2);
      return s;
    };
    const double rho0 = std::clamp(tau_to_parameter(Family::gaussian, tau), -kRhoMax, kRhoMax);
    auto [rho, val] = brent_minimize(nll, -kRhoMax, kRhoMax, 45);
    if (nll(rho0) < val)
      rho = rho0;
    return BivariateCopula::gaussian(rho);
  }
  case Family::student_t:
    return fit_student_t(u, v, tau);
  case Family::clayton: {
    auto nll = [&](double ld) { return nll_of(BivariateCopula::clayton(std::exp(ld))); };
    const double lo = std::log(1e-4), hi = std::log(kClaytonMax);
    auto [ld, val] = brent_minimize(nll, lo, hi, 40);
    if (tau > 0.0 && tau < 0.93) {
      const double ld0 = std::log(tau_to_parameter(Family::clayton, tau));
      if (nll(ld0) < val)
        ld = ld0;
    }
    return BivariateCopula::clayton(std::exp(ld));
  }
  case Family::frank: {
    auto nll = [&](double d) { return nll_of(BivariateCopula::frank(d)); };
    auto [d, val] = brent_minimize(nll, -kFrankMax, kFrankMax, 40);
    const double d0 = tau_to_parameter(Family::frank, tau);
    if (d0 != 0.0 && nll(d0) < val)
      d = d0;
    if (d == 0.0)
      d = 1e-8;
    return BivariateCopula::frank(d);
  }
  case Family::bb1: {
    auto unpack = [](const Eigen::VectorXd& t) {
      return BivariateCopula::bb1(std::exp(t(0)), 1.0 + std::exp(t(1)));
    };
    auto nll = [&](const Eigen::VectorXd& t) {
      const auto c = unpack(t);
      if (c.par[0] > kBb1ThetaMax || c.par[1] > kBb1DeltaMax || c.par[0] < 1e-4)
        return std::numeric_limits<double>::infinity();
      return nll_of(c);
    };
    const double tpos = std::clamp(tau, 0.05, 0.9);
    double de0 = 1.5;
    double th0 = 2.0 / (de0 * (1.0 - tpos)) - 2.0;
    if (th0 < 0.1) {
      th0 = 0.1;
      de0 = std::max(1.05, 2.0 / ((1.0 - tpos) * (th0 + 2.0)));
    }
    Eigen::VectorXd t0(2);
    t0 << std::log(std::min(th0, kBb1ThetaMax * 0.9)),
        std::log(std::min(de0, kBb1DeltaMax * 0.9) - 1.0);
    Eigen::VectorXd step(2);
    step << 0.5, 0.5;
    NelderMeadOptions opts;
    opts.max_evaluations = 600;
    opts.ftol = 1e-9;
    opts.xtol = 1e-7;
    auto r = nelder_mead(nll, t0, step, opts);
    return unpack(r.x);
  }
  }
  return BivariateCopula::independence();
}

} // namespace

BivariateCopula fit_bicop(std::span<const double> u, std::span<const double> v, Family family,
                          int rotation)
{
  check_pairs(u, v);
  if (rotation != 0 && !is_rotatable(family))
    throw FitError("fit_bicop: rotation requested for a non-rotatable family");
  std::vector<double> bu, bv;
  unrotate(u, v, rotation, bu, bv);
  const double tau = empirical_tau(bu, bv);
  BivariateCopula c = fit_base(bu, bv, family, tau);
  c.rotation = rotation;
  c.nobs = u.size();
  c.loglik = bicop_loglik(u, v, c);
  if (!std::isfinite(c.loglik))
    throw FitError("fit_bicop: non-finite log-likelihood for " + to_string(family));
  return c;
}

std::vector<Family> default_families()
{
  return {Family::independence, Family::gaussian, Family::student_t,
          Family::clayton,      Family::frank,    Family::bb1};
}

BivariateCopula select_bicop(std::span<const double> u, std::span<const double> v,
                             const std::vector<Family>& candidates, const SelectOptions& opts)
{
  if (candidates.empty())
    throw FitError("select_bicop: empty candidate list");
  check_pairs(u, v);
  const double tau = empirical_tau(u, v);
  const bool has_indep =
      std::find(candidates.begin(), candidates.end(), Family::independence) != candidates.end();
  if (has_indep && candidates.size() > 1 &&
      tau_independence_pvalue(tau, u.size()) > opts.independence_level) {
    auto c = BivariateCopula::independence();
    c.nobs = u.size();
    return c;
  }

  BivariateCopula best;
  double best_ic = std::numeric_limits<double>::infinity();
  bool any = false;
  std::string failures;
  for (Family f : candidates) {
    std::vector<int> rotations{0};
    if (is_rotatable(f))
      rotations = tau >= 0.0 ? std::vector<int>{0, 180} : std::vector<int>{90, 270};
    for (int rot : rotations) {
      try {
        auto c = fit_bicop(u, v, f, rot);
        const double ic = information_criterion(c, opts.criterion);
        if (ic < best_ic) {
          best_ic = ic;
          best = c;
        }
        any = true;
      } catch (const Error& e) {
        failures += std::string(" ") + e.what() + ";";
      }
    }
  }
  if (!any)
    throw FitError("select_bicop: every candidate failed:" + failures);
  return best;
}

// ---------------------------------------------------------------------------
// Empirical dependence

namespace {

// Merge sort counting exchanges (discordant pairs).
std::uint64_t merge_count(std::vector<double>& a, std::vector<double>& buf, std::size_t lo,
                          std::size_t hi)
{
  if (hi - lo < 2)
    return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(a, buf, lo, mid) + merge_count(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      buf[k++] = a[j++];
      swaps += mid - i;
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid)
    buf[k++] = a[i++];
  while (j < hi)
    buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi), a.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

std::uint64_t tie_pairs(const std::vector<double>& sorted)
{
  std::uint64_t t = 0, run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      t += run * (run - 1) / 2;
      run = 1;
    }
  }
  return t;
}

} // namespace

double empirical_tau(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size())
    throw DomainError("empirical_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2)
    throw DomainError("empirical_tau: need at least two observations");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tie_pairs(xs);
  // joint ties
  std::uint64_t n3 = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
      ++run;
    } else {
      n3 += run * (run - 1) / 2;
      run = 1;
    }
  }
  std::vector<double> buf(n);
  const std::uint64_t swaps = merge_count(ys, buf, 0, n);
  const std::uint64_t n2 = tie_pairs(ys);
  const double denom =
      std::sqrt(static_cast<double>(n0 - n1)) * std::sqrt(static_cast<double>(n0 - n2));
  if (denom == 0.0)
    return 0.0;
  const double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                     static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  return std::clamp(num / denom, -1.0, 1.0);
}

double weighted_tau(std::span<const double> x, std::span<const double> y,
                    std::span<const double> w)
{
  const std::size_t n = x.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0)
      continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ww = w[i] * w[j];
      const double s = (x[i] - x[j]) * (y[i] - y[j]);
      num += s > 0.0 ? ww : (s < 0.0 ? -ww : 0.0);
      den += ww;
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

double tau_independence_pvalue(double tau, std::size_t n)
{
  const double nn = static_cast<double>(n);
  const double stat = std::abs(tau) * std::sqrt(9.0 * nn * (nn - 1.0) / (2.0 * (2.0 * nn + 5.0)));
  return std::erfc(stat / std::numbers::sqrt2);
}

std::vector<double> pseudo_observations(std::span<const double> x)
{
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]])
      ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      out[idx[k]] = rank / static_cast<double>(n + 1);
    i = j + 1;
  }
  return out;
}

Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& data)
{
  Eigen::MatrixXd out(data.rows(), data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const Eigen::VectorXd col = data.col(j);
    const auto u = pseudo_observations(std::span<const double>(col.data(), col.size()));
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      out(i, j) = u[static_cast<std::size_t>(i)];
  }
  return out;
}

double empirical_upper_tail_dep(std::span<const double> x, std::span<const double> y, double q)
{
  if (x.size() != y.size())
    throw DomainError("empirical_upper_tail_dep: length mismatch");
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("empirical_upper_tail_dep: q must lie in (0, 1)");
  if (static_cast<double>(x.size()) * (1.0 - q) < 20.0)
    throw DomainError("empirical_upper_tail_dep: need n * (1 - q) >= 20");
  const auto u = pseudo_observations(x);
  const auto v = pseudo_observations(y);
  std::size_t above = 0, joint = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > q) {
      ++above;
      if (v[i] > q)
        ++joint;
    }
  }
  return above == 0 ? 0.0 : static_cast<double>(joint) / static_cast<double>(above);
}

DependenceSummary dependence_summary(std::span<const double> x, std::span<const double> y,
                                     double q)
{
  DependenceSummary s;
  s.kendall_tau = empirical_tau(x, y);
  s.tail_quantile_used = q;
  if (s.kendall_tau < 0.0) {
    std::vector<double> neg(x.begin(), x.end());
    for (auto& v : neg)
      v = -v;
    s.upper_tail_dep = empirical_upper_tail_dep(neg, y, q);
  } else {
    s.upper_tail_dep = empirical_upper_tail_dep(x, y, q);
  }
  return s;
}

} // namespace vinestress

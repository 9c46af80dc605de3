#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vinestress {

enum class Family { independence, gaussian, student_t, clayton, frank, bb1 };

std::string to_string(Family f);
Family family_from_string(const std::string& name);
//! Number of free parameters of a family.
int parameter_count(Family f);
//! Clayton and BB1 are the only families fitted in rotated form.
bool is_rotatable(Family f);

//! A parametric bivariate copula with an optional counter-clockwise rotation.
//!
//! Parameter layout: gaussian {rho}, student_t {rho, nu}, clayton {delta},
//! frank {delta}, bb1 {theta, delta}.
struct BivariateCopula {
  Family family = Family::independence;
  int rotation = 0;
  std::array<double, 2> par{0.0, 0.0};

  //! Log-likelihood and sample size recorded by the fit (0 when not fitted).
  double loglik = 0.0;
  std::size_t nobs = 0;

  static BivariateCopula independence() { return {}; }
  static BivariateCopula gaussian(double rho) { return {Family::gaussian, 0, {rho, 0.0}}; }
  static BivariateCopula student_t(double rho, double nu)
  {
    return {Family::student_t, 0, {rho, nu}};
  }
  static BivariateCopula clayton(double delta, int rotation = 0)
  {
    return {Family::clayton, rotation, {delta, 0.0}};
  }
  static BivariateCopula frank(double delta) { return {Family::frank, 0, {delta, 0.0}}; }
  static BivariateCopula bb1(double theta, double delta, int rotation = 0)
  {
    return {Family::bb1, rotation, {theta, delta}};
  }

  std::string str() const;
};

//! Throws DomainError if parameters are outside the family domain.
void validate(const BivariateCopula& c);

double bicop_density(double u, double v, const BivariateCopula& c);
double bicop_log_density(double u, double v, const BivariateCopula& c);
double bicop_cdf(double u, double v, const BivariateCopula& c);

//! direction 1: dC/du = P(V <= v | U = u); direction 2: dC/dv = P(U <= u | V = v).
double bicop_hfunc(double u, double v, const BivariateCopula& c, int direction);
double bicop_hfunc1(double u, double v, const BivariateCopula& c);
double bicop_hfunc2(double u, double v, const BivariateCopula& c);
//! Inverse of hfunc1 in v: returns v with hfunc1(u, v) = p.
double bicop_hinv1(double p, double u, const BivariateCopula& c);
//! Inverse of hfunc2 in u: returns u with hfunc2(u, v) = p.
double bicop_hinv2(double p, double v, const BivariateCopula& c);

//! Log density and both h-functions at one point, sharing intermediate
//! quantile computations. Arguments are clamped into the open unit square.
struct PairValues {
  double log_density = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
};
PairValues bicop_evaluate(double u, double v, const BivariateCopula& c);

double bicop_tau(const BivariateCopula& c);
//! Parameter of a one-parameter family (or rho of the t) matching a tau.
double tau_to_parameter(Family f, double tau);

//! n x 2 sample from the copula.
Eigen::MatrixXd bicop_simulate(const BivariateCopula& c, std::size_t n, std::mt19937_64& rng);

enum class Criterion { aic, bic };

//! Maximum likelihood fit of one family at a fixed rotation.
//! Requires at least 30 pairs strictly inside the unit square.
BivariateCopula fit_bicop(std::span<const double> u, std::span<const double> v, Family family,
                          int rotation = 0);

double bicop_loglik(std::span<const double> u, std::span<const double> v,
                    const BivariateCopula& c);
double information_criterion(const BivariateCopula& c, Criterion crit);

//! Default candidate families (all families of the model class).
std::vector<Family> default_families();

struct SelectOptions {
  Criterion criterion = Criterion::bic;
  //! Level of the asymptotic Kendall tau independence pre-test.
  double independence_level = 0.05;
};

//! Fits every candidate (rotated families in the orientation matching the
//! sign of the empirical tau) and returns the information-criterion minimizer.
//! When the candidate list contains the independence copula and the tau test
//! does not reject, the independence copula is returned immediately.
BivariateCopula select_bicop(std::span<const double> u, std::span<const double> v,
                             const std::vector<Family>& candidates,
                             const SelectOptions& opts = {});

// ---------------------------------------------------------------------------
// Empirical dependence summaries

//! Kendall's tau-b (tie corrected), O(n log n).
double empirical_tau(std::span<const double> x, std::span<const double> y);
//! Weighted Kendall tau: sum_{i<j} w_i w_j sign(dx dy) / sum_{i<j} w_i w_j.
double weighted_tau(std::span<const double> x, std::span<const double> y,
                    std::span<const double> w);
//! Two-sided p-value of the asymptotic independence test based on tau.
double tau_independence_pvalue(double tau, std::size_t n);

//! Fraction of points whose y-rank exceeds q among those whose x-rank does.
double empirical_upper_tail_dep(std::span<const double> x, std::span<const double> y,
                                double q = 0.95);

struct DependenceSummary {
  double kendall_tau = 0.0;
  double upper_tail_dep = 0.0;
  double tail_quantile_used = 0.95;
};

//! Tau plus upper tail dependence; when tau < 0 the first variable is negated
//! before estimating tail dependence.
DependenceSummary dependence_summary(std::span<const double> x, std::span<const double> y,
                                     double q = 0.95);

//! Normalized ranks rank / (n + 1), ties averaged.
std::vector<double> pseudo_observations(std::span<const double> x);
Eigen::MatrixXd pseudo_observations(const Eigen::MatrixXd& data);

} // namespace vinestress

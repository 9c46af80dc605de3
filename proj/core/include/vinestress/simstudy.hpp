#pragma once

#include "vinestress/rvine.hpp"
#include "vinestress/scenario.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace vinestress {

//! X ~ multivariate t(nu, 0, sigma) and L = wᵀX.
struct BivariateTSpec {
  double nu = 4.0;
  Eigen::MatrixXd sigma = (Eigen::MatrixXd(2, 2) << 1.0, 0.5, 0.5, 1.0).finished();
  Eigen::VectorXd w = Eigen::Vector2d(0.7, 0.3);
};

//! X from a vine with marginals and L = gᵀX.
struct MetaVineSpec {
  RVineModel model;
  Eigen::VectorXd g;
};

using GeneratorSpec = std::variant<BivariateTSpec, MetaVineSpec>;

//! Throws DomainError for inconsistent dimensions, a non positive definite
//! scale matrix, nu <= 2 or a vine without marginals.
void validate(const GeneratorSpec& g);
int generator_dim(const GeneratorSpec& g);

//! Stand-in 4-dimensional meta-vine with skew-t marginals and
//! g = (-1.944, -0.018, 0.011, 0.011).
MetaVineSpec meta_vine_standin();

struct SimSample {
  Eigen::MatrixXd x;
  Eigen::VectorXd loss;
};

//! Scale-mixture sampling: normal draws divided by sqrt(chi2_nu / nu).
SimSample generate_bivariate_t(const BivariateTSpec& s, std::size_t n, std::mt19937_64& rng);
SimSample generate_meta_vine(const MetaVineSpec& s, std::size_t n, std::mt19937_64& rng);
SimSample generate(const GeneratorSpec& g, std::size_t n, std::mt19937_64& rng);

double true_log_density(const GeneratorSpec& g, const Eigen::VectorXd& x);
double true_loss(const GeneratorSpec& g, const Eigen::VectorXd& x);

//! Population quantile of L: exact for the t generator, Monte Carlo with
//! `draws` samples otherwise.
double population_loss_quantile(const GeneratorSpec& g, double level,
                                std::size_t draws = 400000, std::uint64_t seed = 7);

//! Sigma w l / (wᵀ Sigma w): the scenario of an elliptical law with linear loss.
Eigen::VectorXd elliptical_scenario(const BivariateTSpec& s, double threshold);

//! Search box for the population scenario, from a large seeded sample.
Bounds population_bounds(const GeneratorSpec& g, std::size_t draws = 20000,
                         std::uint64_t seed = 11);

//! Population scenario: mode of the true density subject to g(x) >= l.
Eigen::VectorXd true_scenario(const GeneratorSpec& g, double threshold,
                              const OptimizerConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics

//! Mean percentage error of estimates of a scalar with true value theta.
double mpe(std::span<const double> estimates, double theta);
//! Root mean squared percentage error.
double rmspe(std::span<const double> estimates, double theta);
//! Mean Euclidean distance of the rows of `estimates` from `truth`.
double ml2(const Eigen::MatrixXd& estimates, const Eigen::VectorXd& truth);
//! Percentage of losses at or above the threshold.
double exceedance_rate(std::span<const double> losses, double threshold);

// ---------------------------------------------------------------------------
// Study

struct StudyConfig {
  GeneratorSpec generator = BivariateTSpec{};
  std::size_t n = 3000;
  int replications = 100;
  //! Threshold; when unset, the population quantile of L at `level`.
  std::optional<double> threshold;
  double level = 0.99;
  std::vector<Method> methods{Method::cm1, Method::cm2, Method::cm3, Method::gkk};
  std::uint64_t seed = 1;
  PipelineConfig pipeline;
  OptimizerConfig optimizer;
  //! Settings for the population scenario (more thorough by default).
  OptimizerConfig truth_optimizer;
  //! Replications run in parallel.
  std::size_t workers = 1;
};

void validate(const StudyConfig& c);

struct MethodSummary {
  Method method = Method::cm1;
  std::vector<double> mpe;
  std::vector<double> rmspe;
  double ml2 = 0.0;
  //! Percent of estimates whose true loss reaches the threshold.
  double e_r = 0.0;
  int successes = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  //! successes x d estimates in replication order.
  Eigen::MatrixXd estimates;
};

struct SimulationReport {
  Eigen::VectorXd truth;
  double threshold = 0.0;
  std::size_t n = 0;
  int replications = 0;
  std::vector<MethodSummary> methods;
  double runtime_seconds = 0.0;

  const MethodSummary& get(Method m) const;
};

SimulationReport run_study(const StudyConfig& c);

//! Plain-text table: MPE and RMSPE per component, ML2 (x100) and E_r.
std::string format_report_table(const SimulationReport& r);

} // namespace vinestress

#pragma once

#include "vinestress/errors.hpp"
#include "vinestress/scenario.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace vinestress {

//! Too many bootstrap replications failed, or too few remain.
class BootstrapError : public EstimationError {
public:
  using EstimationError::EstimationError;
};

struct BootstrapPlan {
  std::size_t n = 0;
  //! Expected geometric block length; 0 means n^(1/3).
  double mean_block = 0.0;
  int replications = 500;
  std::uint64_t seed = 1;
  double level = 0.95;
  //! Largest tolerated fraction of failed replications.
  double max_failure_fraction = 0.2;

  double effective_mean_block() const;
};

double default_mean_block(std::size_t n);

//! Throws DomainError unless n >= 1, mean block >= 1, B >= 2, level in (0, 1).
void validate(const BootstrapPlan& p);

//! Geometric block length on {1, 2, ...} with the given mean.
std::size_t geometric_block_length(double mean_block, std::mt19937_64& rng);

//! Stationary (circular) block bootstrap index vector of length n. Block
//! lengths, the last one truncated, are appended to `blocks` when given.
std::vector<std::size_t> stationary_bootstrap_indices(const BootstrapPlan& p, std::mt19937_64& rng,
                                                      std::vector<std::size_t>* blocks = nullptr);

struct Interval {
  double lower = 0.0;
  double point = 0.0;
  double upper = 0.0;
};

struct BootstrapResult {
  std::vector<Interval> components;
  double level = 0.95;
  int replications = 0;
  //! Successful replications.
  int effective = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  //! effective x components bootstrap estimates.
  Eigen::MatrixXd draws;
};

//! Replicate b receives its index vector and the derived seed plan.seed + b.
using Replicate =
    std::function<Eigen::VectorXd(const std::vector<std::size_t>& indices, std::uint64_t seed)>;

//! Percentile intervals around `point` from B replications. Replications
//! that throw a library Error are counted as failures and excluded.
BootstrapResult bootstrap_ci(const Eigen::VectorXd& point, const BootstrapPlan& plan,
                             const Replicate& replicate, std::size_t workers = 1);

struct ScenarioBootstrapConfig {
  Method method = Method::cm3;
  PipelineConfig pipeline;
  OptimizerConfig optimizer;
  //! Reuse the predictor-vine structure of the original fit on every resample.
  bool freeze_structure = false;
  //! Replications run in parallel; each uses a single-threaded optimizer.
  std::size_t workers = 1;
};

//! Estimates the scenario on the data, then refits marginals, vine and
//! estimator on stationary-bootstrap resamples of the rows at the same
//! threshold. Throws BootstrapError when more than the tolerated fraction
//! of replications fail.
BootstrapResult bootstrap_scenario_ci(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                      double threshold, const ScenarioBootstrapConfig& cfg,
                                      BootstrapPlan plan);

} // namespace vinestress

#pragma once

#include "vinestress/rvine.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vinestress {

// ---------------------------------------------------------------------------
// Box-constrained global maximization

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& x) const;
};

//! Componentwise data range widened by `expand` times the range on each side.
Bounds search_bounds(const Eigen::MatrixXd& data, double expand = 0.5);

struct OptimizerConfig {
  //! 0 picks max(20, 10 * dim).
  int population_size = 0;
  //! Generations per restart.
  int iterations = 4000;
  int restarts = 10;
  std::uint64_t seed = 1;
  //! Differential weight F and crossover rate CR of rand/1/bin.
  double weight = 0.8;
  double crossover = 0.9;
  //! A restart stops once the population's objective spread falls below
  //! tolerance * (1 + |best|).
  double tolerance = 1e-10;
  //! ... or when the best value has not improved by more than `tolerance`
  //! for this many generations (0 disables).
  int patience = 0;
  //! Local Nelder-Mead polish of the overall winner.
  bool polish = true;
  //! Worker threads for population evaluation (0 = all cores). Results do
  //! not depend on this value.
  std::size_t workers = 1;
};

void validate(const OptimizerConfig& c);

struct OptimizerDiagnostics {
  int restarts = 0;
  //! Generations summed over restarts.
  int iterations = 0;
  long evaluations = 0;
  //! True when the winning restart met the spread criterion.
  bool converged = false;
  std::vector<double> restart_values;
};

struct OptimizationResult {
  Eigen::VectorXd x;
  double value = 0.0;
  OptimizerDiagnostics diagnostics;
};

//! Maximizes `objective` over the box by multi-start differential evolution
//! (rand/1/bin in coordinates normalized to the unit cube). Non-finite
//! objective values count as -infinity, so infeasible points are rejected.
//! Deterministic given the seed.
OptimizationResult optimize_density(const std::function<double(const Eigen::VectorXd&)>& objective,
                                    const Bounds& bounds, const OptimizerConfig& cfg);

//! argmax of logf on the box subject to slack(x) >= 0. The unconstrained
//! maximizer is returned when feasible; otherwise infeasible points score
//! -infinity and the winner is moved onto the active constraint by
//! bisection towards the unconstrained maximizer. Throws EstimationError
//! when no feasible point is found.
OptimizationResult maximize_constrained(const std::function<double(const Eigen::VectorXd&)>& logf,
                                        const std::function<double(const Eigen::VectorXd&)>& slack,
                                        const Bounds& bounds, const OptimizerConfig& cfg);

// ---------------------------------------------------------------------------
// Stress-scenario estimators

enum class Method { cm1, cm2, cm3, cm_star, gkk };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

//! Fitted joint model of risk factors X (variables 0..d-1) and loss L
//! (variable d), with marginals, plus the threshold and search box.
struct ScenarioProblem {
  LeafConstrainedVine model;
  double threshold = 0.0;
  Bounds bounds;
  //! Factors held at their marginal modes and excluded from the search
  //! (independent of the loss); empty means none.
  std::vector<bool> fixed_factors;

  int dim() const { return model.predictors(); }
};

struct ScenarioEstimate {
  Method method = Method::cm1;
  Eigen::VectorXd m_hat;
  double threshold = 0.0;
  //! ghat(m_hat); NaN when the vine regression cannot predict there.
  double fitted_loss = 0.0;
  double objective_value = 0.0;
  OptimizerDiagnostics diagnostics;
};

//! argmax_x log f(x, l) of the joint model.
ScenarioEstimate estimate_cm1(const ScenarioProblem& p, const OptimizerConfig& cfg);
//! argmax_x log f_X(x) subject to ghat(x) >= l, ghat being the vine
//! regression conditional median.
ScenarioEstimate estimate_cm2(const ScenarioProblem& p, const OptimizerConfig& cfg);
//! argmax_x log f_X(x) + log(1 - F(l | x)).
ScenarioEstimate estimate_cm3(const ScenarioProblem& p, const OptimizerConfig& cfg);
//! argmax_x log f_X(x) subject to g(x) >= l with a known loss map g.
ScenarioEstimate estimate_cm_star(const ScenarioProblem& p,
                                  const std::function<double(const Eigen::VectorXd&)>& g,
                                  const OptimizerConfig& cfg);
//! Mean of the factor rows whose loss is at least l (needs >= 20 rows).
ScenarioEstimate estimate_gkk(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                              double threshold);

//! Mode of the fitted factor density f_X.
Eigen::VectorXd unconditional_mode(const ScenarioProblem& p, const OptimizerConfig& cfg);

//! ghat(x) by vine regression (throws PredictionError outside the range).
double fitted_loss_at(const Eigen::VectorXd& x, const LeafConstrainedVine& v);

//! Factors whose Kendall tau with the loss is not significant at `level`.
std::vector<bool> independent_factors(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                      double level = 0.05);

// ---------------------------------------------------------------------------
// Fitting pipeline

enum class MarginalKind { skew_t, hybrid };

std::string to_string(MarginalKind k);
MarginalKind marginal_kind_from_string(const std::string& name);

struct PipelineConfig {
  //! One entry per column of (X, L); empty means skew-t everywhere.
  std::vector<MarginalKind> marginals;
  double hybrid_q_lo = 0.15;
  double hybrid_q_hi = 0.85;
  VineFitOptions vine;
  //! Predictor-vine structure to reuse instead of selecting one.
  std::optional<RVineStructure> x_structure;
  //! Copula data from normalized ranks instead of the fitted marginals.
  bool rank_pseudo_obs = false;
};

MarginalModel fit_marginal(std::span<const double> sample, MarginalKind kind, double q_lo = 0.15,
                           double q_hi = 0.85);

//! Marginals for every column of (X, L), then the leaf-constrained vine.
LeafConstrainedVine fit_joint_model(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                    const PipelineConfig& cfg);

//! Fitted model, search box from the data and the given threshold.
//! The vine step of fit_joint_model with the marginals supplied.
LeafConstrainedVine fit_vine_with_marginals(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                                            std::vector<MarginalModel> margins,
                                            const PipelineConfig& cfg);

ScenarioProblem make_problem(const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                             double threshold, const PipelineConfig& cfg);

//! Empirical quantile (type 7) of a sample.
double empirical_quantile(std::span<const double> sample, double q);

//! Runs one estimator end to end on data (fit + estimate). For cm_star the
//! true loss map must be supplied.
ScenarioEstimate run_estimator(Method m, const Eigen::MatrixXd& x, const Eigen::VectorXd& loss,
                               double threshold, const PipelineConfig& pipeline,
                               const OptimizerConfig& opt,
                               const std::function<double(const Eigen::VectorXd&)>& true_g = {});

} // namespace vinestress
